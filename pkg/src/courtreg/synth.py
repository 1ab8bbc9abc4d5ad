"""Synthetic ground truth: broadcast-style views, rendered heatmaps, corruptions.

Stands in for a trained keypoint network so the geometric pipeline can be
checked end to end against known homographies.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from .court import KeypointLayout, build_layout
from .formats import save_homography, save_json, save_layout, save_tensor
from .heatmaps import (DEFAULT_RADIUS, DEFAULT_STRIDE, ClassMap, HeatmapTensor, heatmap_shape,
                       one_hot, projected_centers, render_disks, render_gt_class_map)
from .homography import Homography, average_homography, is_degenerate

log = logging.getLogger(__name__)


class RejectionBudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class ViewSamplerConfig:
    focal_px: tuple[float, float] = (900.0, 1600.0)
    camera_height_cm: tuple[float, float] = (400.0, 900.0)
    camera_distance_cm: tuple[float, float] = (800.0, 2500.0)
    lateral_offset_cm: tuple[float, float] = (-800.0, 800.0)
    look_at_jitter_cm: float = 400.0
    min_visible_keypoints: int = 20
    frame_size: tuple[int, int] = (960, 540)
    max_attempts: int = 100

    def __post_init__(self):
        for name in ("focal_px", "camera_height_cm", "camera_distance_cm", "lateral_offset_cm"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is empty")
        if self.min_visible_keypoints < 4:
            raise ValueError("min_visible_keypoints must be >= 4")


@dataclass(frozen=True)
class CorruptionConfig:
    dropout_rate: float = 0.0
    jitter_sigma_px: float = 0.0
    false_blob_count: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ValueError("dropout_rate must lie in [0, 1]")
        if self.jitter_sigma_px < 0:
            raise ValueError("jitter_sigma_px must be >= 0")
        if self.false_blob_count < 0:
            raise ValueError("false_blob_count must be >= 0")

    @property
    def enabled(self) -> bool:
        return self.dropout_rate > 0 or self.jitter_sigma_px > 0 or self.false_blob_count > 0


def look_at_rotation(camera: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World-to-camera rotation with zero roll (camera x right, y down, z forward)."""
    fwd = target - camera
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd])


def ground_homography(focal: float, camera: np.ndarray, target: np.ndarray,
                      frame_size: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Court-plane (z = 0) homography of a pinhole camera, plus its rotation."""
    w, h = frame_size
    K = np.array([[focal, 0, w / 2.0], [0, focal, h / 2.0], [0, 0, 1.0]])
    R = look_at_rotation(camera, target)
    t = -R @ camera
    return K @ np.column_stack([R[:, 0], R[:, 1], t]), R


def view_is_acceptable(H: np.ndarray, layout: KeypointLayout, frame_size: tuple[int, int],
                       min_visible: int) -> bool:
    w, h = frame_size
    L, W = layout.template.length_cm, layout.template.width_cm
    corners = np.array([[0, 0], [L, 0], [L, W], [0, W]], dtype=float)
    q = np.c_[corners, np.ones(4)] @ H.T
    if np.any(q[:, 2] <= 0):
        return False
    c = q[:, :2] / q[:, 2:]
    # within a box four times the frame, centered on it
    if np.any(np.abs(c[:, 0] - w / 2) > 2 * w) or np.any(np.abs(c[:, 1] - h / 2) > 2 * h):
        return False
    if polygon_orientation(c) >= 0:
        return False
    kp = layout.court_points()
    q = np.c_[kp, np.ones(len(kp))] @ H.T
    front = q[:, 2] > 0
    uv = q[front, :2] / q[front, 2:]
    visible = (uv[:, 0] >= 0) & (uv[:, 0] < w) & (uv[:, 1] >= 0) & (uv[:, 1] < h)
    if visible.sum() < min_visible:
        return False
    return not is_degenerate(Homography(H))


def polygon_orientation(pts: np.ndarray) -> float:
    """Shoelace signed area in the given coordinates.

    Image y points down, so an unmirrored view of the counter-clockwise court
    outline has negative area.
    """
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def sample_view_homography(cfg: ViewSamplerConfig, rng: np.random.Generator,
                           layout: Optional[KeypointLayout] = None) -> Homography:
    """Draw a plausible court->image homography seen from behind the y = 0 sideline."""
    layout = layout or build_layout()
    L, W = layout.template.length_cm, layout.template.width_cm
    for _ in range(cfg.max_attempts):
        focal = rng.uniform(*cfg.focal_px)
        height = rng.uniform(*cfg.camera_height_cm)
        dist = rng.uniform(*cfg.camera_distance_cm)
        lateral = rng.uniform(*cfg.lateral_offset_cm)
        jx, jy = rng.uniform(-cfg.look_at_jitter_cm, cfg.look_at_jitter_cm, size=2)
        camera = np.array([L / 2 + lateral, -dist, height])
        target = np.array([L / 2 + jx, W / 2 + jy, 0.0])
        H, _ = ground_homography(focal, camera, target, cfg.frame_size)
        if view_is_acceptable(H, layout, cfg.frame_size, cfg.min_visible_keypoints):
            return Homography(H)
    raise RejectionBudgetExhausted(f"no acceptable view in {cfg.max_attempts} attempts")


def class_centroids(m: ClassMap, background: int) -> dict[int, tuple[float, float]]:
    lab = m.labels
    H, W = lab.shape
    flat = lab.ravel()
    yy, xx = np.divmod(np.arange(H * W), W)
    n = np.bincount(flat)
    sx = np.bincount(flat, weights=xx)
    sy = np.bincount(flat, weights=yy)
    return {int(k): (sx[k] / n[k], sy[k] / n[k]) for k in np.flatnonzero(n) if k != background}


def corrupt_class_map(m: ClassMap, layout: KeypointLayout, cfg: CorruptionConfig,
                      centers: Optional[dict[int, tuple[float, float]]] = None,
                      radius_px: float = DEFAULT_RADIUS) -> ClassMap:
    """Drop, jitter and hallucinate keypoint disks in a class map.

    ``centers`` gives the disk centers in heatmap pixels (defaults to the
    label centroids); only classes present in ``m`` are considered.
    """
    bg = layout.background_id
    rng = np.random.default_rng(cfg.seed)
    present = sorted(int(k) for k in np.unique(m.labels) if k != bg)
    if centers is None:
        centers = class_centroids(m, bg)
    keep = rng.random(len(present)) >= cfg.dropout_rate
    survivors = [k for k, kept in zip(present, keep) if kept]
    dropped = [k for k, kept in zip(present, keep) if not kept]

    if cfg.jitter_sigma_px > 0:
        moved = {}
        for k in survivors:
            dx, dy = rng.normal(0.0, cfg.jitter_sigma_px, size=2)
            moved[k] = (centers[k][0] + dx, centers[k][1] + dy)
        labels = render_disks(moved, m.labels.shape, radius_px, bg)
    else:
        labels = m.labels.copy()
        if dropped:
            labels[np.isin(labels, dropped)] = bg

    if cfg.false_blob_count:
        court_ids = layout.court_ids
        Hh, Ww = labels.shape
        yy, xx = np.mgrid[0:Hh, 0:Ww]
        for _ in range(cfg.false_blob_count):
            k = int(rng.choice(court_ids))
            cx, cy = rng.uniform(0, Ww), rng.uniform(0, Hh)
            labels[(xx - cx) ** 2 + (yy - cy) ** 2 <= radius_px ** 2] = k
    return ClassMap(labels, m.num_classes, m.stride)


def class_map_to_tensor(m: ClassMap, num_classes: int, soft: bool = False,
                        sigma: float = 1.5, sharpness: float = 8.0) -> HeatmapTensor:
    """One-hot scores, or softmax-normalized blurred bumps when ``soft``."""
    t = one_hot(m, num_classes)
    if not soft:
        return t
    logits = sharpness * gaussian_filter(t.scores.astype(float), sigma=(0, sigma, sigma))
    logits -= logits.max(axis=0, keepdims=True)
    e = np.exp(logits)
    return HeatmapTensor((e / e.sum(axis=0, keepdims=True)).astype(np.float32), m.stride)


@dataclass(frozen=True)
class SyntheticFrame:
    homography: Homography
    class_map: ClassMap


def synth_frame(layout: KeypointLayout, view_cfg: ViewSamplerConfig,
                corrupt_cfg: Optional[CorruptionConfig], seed, stride: int = DEFAULT_STRIDE,
                radius_px: float = DEFAULT_RADIUS) -> SyntheticFrame:
    """One ground-truth view and its (possibly corrupted) class map.

    ``seed`` may be anything accepted by ``numpy.random.SeedSequence``.
    """
    view_ss, corrupt_ss = np.random.SeedSequence(seed).spawn(2)
    h = sample_view_homography(view_cfg, np.random.default_rng(view_ss), layout)
    m = render_gt_class_map(layout, h, view_cfg.frame_size, stride, radius_px)
    if corrupt_cfg is not None and corrupt_cfg.enabled:
        cseed = int(corrupt_ss.generate_state(1, np.uint64)[0]) ^ corrupt_cfg.seed
        centers = projected_centers(layout, h, stride)
        m = corrupt_class_map(m, layout, CorruptionConfig(corrupt_cfg.dropout_rate,
                                                          corrupt_cfg.jitter_sigma_px,
                                                          corrupt_cfg.false_blob_count, cseed),
                              centers, radius_px)
    return SyntheticFrame(h, m)


def fallback_homography(layout: KeypointLayout, view_cfg: ViewSamplerConfig, seed: int,
                        count: int = 16) -> Homography:
    """Average of ``count`` independently sampled views, for use as the fallback."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xFA11]))
    return average_homography([sample_view_homography(view_cfg, rng, layout) for _ in range(count)],
                              layout)


def generate_dataset(n: int, view_cfg: ViewSamplerConfig = ViewSamplerConfig(),
                     corrupt_cfg: Optional[CorruptionConfig] = None,
                     out_dir: str | Path = "synth", master_seed: int = 0, *,
                     layout: Optional[KeypointLayout] = None, stride: int = DEFAULT_STRIDE,
                     radius_px: float = DEFAULT_RADIUS, labels_only: bool = False,
                     soft: bool = False, jobs: int = 1) -> dict:
    """Write ``n`` synthetic frames plus manifest, layout and fallback homography.

    Tensors are one-hot float scores (or uint16 label maps with
    ``labels_only``). Frame i is seeded by ``(master_seed, i)``, so output
    bytes do not depend on ``jobs``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    layout = layout or build_layout()
    out = Path(out_dir)
    (out / "heatmaps").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(parents=True, exist_ok=True)

    def work(i: int) -> dict:
        fid = f"frame_{i:05d}"
        fr = synth_frame(layout, view_cfg, corrupt_cfg, [master_seed, i], stride, radius_px)
        payload = fr.class_map if labels_only else class_map_to_tensor(fr.class_map, layout.num_classes, soft)
        tensor_rel = f"heatmaps/{fid}.kchm"
        gt_rel = f"gt/{fid}.json"
        save_tensor(out / tensor_rel, payload)
        save_homography(out / gt_rel, fr.homography)
        return {"id": fid, "heatmaps": tensor_rel, "gt_homography": gt_rel}

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            frames = list(pool.map(work, range(n)))
    else:
        frames = [work(i) for i in range(n)]

    save_layout(out / "layout.json", layout)
    save_homography(out / "fallback.json", fallback_homography(layout, view_cfg, master_seed))
    manifest = {"frames": frames, "frame_size": list(view_cfg.frame_size), "stride": stride}
    save_json(out / "manifest.json", manifest)
    log.info("wrote %d frames to %s", n, out)
    return manifest
