"""Per-frame registration and the six-point reprojection metric."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .court import KeypointLayout
from .formats import FormatError, load_homography, load_json, load_tensor
from .heatmaps import ClassMap, HeatmapTensor, decode_keypoints
from .homography import Homography, RansacConfig, is_degenerate, project, ransac_homography

log = logging.getLogger(__name__)

DEGENERACY_PROBES = ((240.0, 270.0), (720.0, 270.0))


class FallbackReason(str, Enum):
    NO_MODEL = "no_model"
    DEGENERATE = "degenerate"
    TOO_FEW_KEYPOINTS = "too_few_keypoints"


@dataclass(frozen=True)
class RegistrationResult:
    homography: Homography
    inlier_count: int
    decoded_count: int
    used_fallback: bool = False
    fallback_reason: Optional[FallbackReason] = None

    def __post_init__(self):
        if self.used_fallback != (self.fallback_reason is not None):
            raise ValueError("used_fallback must be set exactly when fallback_reason is")
        if self.inlier_count > self.decoded_count:
            raise ValueError("inlier_count cannot exceed decoded_count")

    def to_dict(self) -> dict:
        return {"homography": self.homography.to_dict(),
                "inlier_count": self.inlier_count,
                "decoded_count": self.decoded_count,
                "used_fallback": self.used_fallback,
                "fallback_reason": None if self.fallback_reason is None else self.fallback_reason.value}

    @classmethod
    def from_dict(cls, d: dict) -> "RegistrationResult":
        reason = d.get("fallback_reason")
        return cls(Homography.from_dict(d["homography"]), int(d["inlier_count"]),
                   int(d["decoded_count"]), bool(d["used_fallback"]),
                   None if reason is None else FallbackReason(reason))


def estimate_frame(t: HeatmapTensor | ClassMap, layout: KeypointLayout,
                   cfg: RansacConfig, fallback: Homography, *,
                   min_support: int = 3,
                   probes: Sequence[Sequence[float]] = DEGENERACY_PROBES,
                   max_dist_cm: float = 1800.0) -> RegistrationResult:
    """Decode keypoints, fit a robust homography, and fall back when it fails.

    Only a class-count mismatch raises; every estimation failure is reported
    through ``fallback_reason``.
    """
    decoded = decode_keypoints(t, layout, min_support)
    usable = layout.usable_mask
    kept = [d for d in decoded if usable[d.class_id]]
    n = len(kept)
    if n < 4:
        return RegistrationResult(fallback, 0, n, True, FallbackReason.TOO_FEW_KEYPOINTS)

    court = np.array([layout.entries[d.class_id].court_xy_cm for d in kept], dtype=float)
    image = np.array([d.image_xy for d in kept], dtype=float)
    h, mask = ransac_homography((court, image), cfg)
    if h is None:
        return RegistrationResult(fallback, 0, n, True, FallbackReason.NO_MODEL)
    inliers = int(mask.sum())
    if is_degenerate(h, probes[0], probes[1], max_dist_cm):
        return RegistrationResult(fallback, inliers, n, True, FallbackReason.DEGENERATE)
    return RegistrationResult(h, inliers, n)


def frame_probes(frame_w: float, frame_h: float) -> np.ndarray:
    """Left, center and right image points on the middle row and the bottom row."""
    xs = (0.0, frame_w / 2.0, float(frame_w))
    return np.array([(x, y) for y in (frame_h / 2.0, float(frame_h)) for x in xs])


def frame_error(h_gt: Homography, h_est: Homography, frame_w: int = 960, frame_h: int = 540,
                probes: Optional[np.ndarray] = None) -> float:
    """RMS court-space distance (cm) between probes back-projected by both homographies.

    Returns +inf if any probe maps to infinity under either homography.
    """
    pts = frame_probes(frame_w, frame_h) if probes is None else np.asarray(probes, dtype=float)
    a = project(h_gt.inv, pts)
    b = project(h_est.inv, pts)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return math.inf
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


@dataclass
class FrameRecord:
    id: str
    error_cm: float
    used_fallback: bool = False
    fallback_reason: Optional[str] = None
    inlier_count: int = 0
    decoded_count: int = 0
    failed: bool = False
    message: Optional[str] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EvaluationReport:
    per_frame_error_cm: list[float]
    mean_error_cm: float
    pct_below_100cm: float
    fallback_count: int
    rms_error_cm: float = math.nan
    frames: list[FrameRecord] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @classmethod
    def from_records(cls, records: list[FrameRecord]) -> "EvaluationReport":
        if not records:
            raise ValueError("empty dataset")
        errs = np.array([r.error_cm for r in records], dtype=float)
        return cls(per_frame_error_cm=[float(e) for e in errs],
                   mean_error_cm=float(errs.mean()),
                   pct_below_100cm=float(100.0 * np.mean(errs < 100.0)),
                   fallback_count=sum(r.used_fallback for r in records),
                   rms_error_cm=float(np.sqrt(np.mean(errs ** 2))),
                   frames=records,
                   failures=[r.id for r in records if r.failed])

    def to_dict(self) -> dict:
        return {"per_frame_error_cm": self.per_frame_error_cm,
                "mean_error_cm": self.mean_error_cm,
                "pct_below_100cm": self.pct_below_100cm,
                "fallback_count": self.fallback_count,
                "rms_error_cm": self.rms_error_cm,
                "frames": [r.to_dict() for r in self.frames],
                "failures": self.failures}


def frame_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def _evaluate_one(index: int, entry: dict, base: Path, layout: KeypointLayout,
                  cfg: RansacConfig, fallback: Homography, frame_size, min_support: int,
                  stride: int) -> FrameRecord:
    fid = str(entry.get("id", index))
    try:
        t = load_tensor(base / entry["heatmaps"], stride)
        gt = load_homography(base / entry["gt_homography"])
    except (OSError, KeyError, TypeError, FormatError, ValueError) as exc:
        log.warning("frame %s: %s", fid, exc)
        return FrameRecord(fid, math.inf, failed=True, message=str(exc))
    frame_cfg = replace(cfg, seed=frame_seed(cfg.seed, index))
    try:
        res = estimate_frame(t, layout, frame_cfg, fallback, min_support=min_support)
    except ValueError as exc:
        log.warning("frame %s: %s", fid, exc)
        return FrameRecord(fid, math.inf, failed=True, message=str(exc))
    err = frame_error(gt, res.homography, *frame_size)
    return FrameRecord(fid, err, res.used_fallback,
                       None if res.fallback_reason is None else res.fallback_reason.value,
                       res.inlier_count, res.decoded_count)


def evaluate_dataset(manifest: dict | str | Path, layout: KeypointLayout, cfg: RansacConfig,
                     fallback: Homography, *, base_dir: str | Path | None = None,
                     jobs: int = 1, min_support: int = 3) -> EvaluationReport:
    """Register every frame of a manifest and aggregate the frame errors.

    Unreadable frames are recorded with an infinite error and listed in
    ``failures``; the run continues. RANSAC seeds derive from
    ``(cfg.seed, frame index)`` so results do not depend on ``jobs``.
    """
    if not isinstance(manifest, dict):
        path = Path(manifest)
        base_dir = path.parent if base_dir is None else base_dir
        manifest = load_json(path)
    base = Path(base_dir or ".")
    frames = manifest.get("frames") or []
    if not frames:
        raise ValueError("empty dataset")
    frame_size = tuple(manifest.get("frame_size", (960, 540)))
    stride = int(manifest.get("stride", 4))

    def work(item):
        i, entry = item
        return _evaluate_one(i, entry, base, layout, cfg, fallback, frame_size, min_support, stride)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            records = list(pool.map(work, enumerate(frames)))
    else:
        records = [work(item) for item in enumerate(frames)]
    return EvaluationReport.from_records(records)
