"""Planar homography estimation: normalized DLT, seeded RANSAC, sanity checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .court import KeypointLayout

_W_EPS = 1e-12


class DegenerateInputError(ValueError):
    """Point configuration does not determine a unique homography."""


class PointAtInfinityError(ValueError):
    """A point maps onto the line at infinity."""


@dataclass(frozen=True, eq=False)
class Homography:
    """Court (cm) -> image (px) projective map, stored with h[2, 2] = 1 when possible."""

    h: np.ndarray
    direction: str = "court_to_image"

    def __post_init__(self):
        h = np.array(self.h, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(h)):
            raise ValueError("homography has non-finite entries")
        h = normalize_matrix(h)
        if abs(np.linalg.det(h)) <= 1e-12:
            raise ValueError("homography is singular")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def inv(self) -> np.ndarray:
        return np.linalg.inv(self.h)

    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.h)

    def apply(self, pts) -> np.ndarray:
        return apply(self, pts)

    def apply_inverse(self, pts) -> np.ndarray:
        return apply_inverse(self, pts)

    def to_dict(self) -> dict:
        return {"direction": self.direction, "units": "cm_to_px",
                "h": [[float(v) for v in row] for row in self.h]}

    @classmethod
    def from_dict(cls, d: dict) -> "Homography":
        if d.get("direction", "court_to_image") != "court_to_image":
            raise ValueError(f"unsupported homography direction {d.get('direction')!r}")
        h = np.asarray(d["h"], dtype=float)
        if h.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got shape {h.shape}")
        return cls(h)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.h, other.h)

    def __repr__(self):
        return f"Homography({np.array2string(self.h, precision=6)})"


def normalize_matrix(h: np.ndarray) -> np.ndarray:
    h = np.array(h, dtype=float)
    if abs(h[2, 2]) > _W_EPS:
        return h / h[2, 2]
    return h / np.linalg.norm(h)


def project(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply a 3x3 matrix to (N, 2) points. Points at infinity come back as NaN."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    q = pts @ h[:, :2].T + h[:, 2]
    w = q[:, 2]
    out = np.full((len(pts), 2), np.nan)
    ok = np.abs(w) > _W_EPS
    out[ok] = q[ok, :2] / w[ok, None]
    return out


def _apply_matrix(h: np.ndarray, pts) -> np.ndarray:
    arr = np.asarray(pts, dtype=float)
    out = project(h, arr.reshape(-1, 2))
    if np.isnan(out).any():
        raise PointAtInfinityError("point maps to infinity")
    return out.reshape(arr.shape)


def apply(h: Homography, court_xy) -> np.ndarray:
    """Map court point(s) to image coordinates. Accepts (2,) or (N, 2)."""
    return _apply_matrix(h.h, court_xy)


def apply_inverse(h: Homography, image_xy) -> np.ndarray:
    """Map image point(s) back to the court plane."""
    return _apply_matrix(h.inv, image_xy)


@dataclass(frozen=True)
class Correspondence:
    class_id: int
    court_xy_cm: tuple[float, float]
    image_xy_px: tuple[float, float]


def _as_arrays(corrs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(corrs, tuple) and len(corrs) == 2 and isinstance(corrs[0], np.ndarray):
        src, dst = corrs
    else:
        corrs = list(corrs)
        src = np.array([c.court_xy_cm for c in corrs], dtype=float).reshape(-1, 2)
        dst = np.array([c.image_xy_px for c in corrs], dtype=float).reshape(-1, 2)
    return np.asarray(src, dtype=float), np.asarray(dst, dtype=float)


def hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity taking ``pts`` to zero centroid and mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if not d > 0:
        raise DegenerateInputError("degenerate input: all points coincide")
    s = math.sqrt(2) / d
    return np.array([[s, 0, -s * c[0]],
                     [0, s, -s * c[1]],
                     [0, 0, 1.0]])


def _design_matrix(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Stacked DLT rows; works on (..., n, 2) inputs."""
    x, y = src[..., 0], src[..., 1]
    u, v = dst[..., 0], dst[..., 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    r1 = np.stack([x, y, one, zero, zero, zero, -u * x, -u * y, -u], axis=-1)
    r2 = np.stack([zero, zero, zero, x, y, one, -v * x, -v * y, -v], axis=-1)
    a = np.stack([r1, r2], axis=-2)  # (..., n, 2, 9)
    return a.reshape(*a.shape[:-3], -1, 9)


def _has_collinear_triple(pts: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    """For (..., 4, 2) samples, whether any 3 of the 4 points are collinear."""
    flags = np.zeros(pts.shape[:-2], dtype=bool)
    span = np.ptp(pts, axis=-2).max(axis=-1)
    scale = np.maximum(span, 1e-300) ** 2
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        a = pts[..., j, :] - pts[..., i, :]
        b = pts[..., k, :] - pts[..., i, :]
        cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
        flags |= np.abs(cross) <= rel_tol * scale
    return flags


def dlt_homography(corrs) -> Homography:
    """Least-squares homography from >= 4 court/image correspondences.

    ``corrs`` is a sequence of Correspondence or a ``(court_xy, image_xy)``
    pair of (N, 2) arrays. Both point sets are Hartley-normalized before the
    SVD solve.
    """
    src, dst = _as_arrays(corrs)
    n = len(src)
    if n < 4 or len(dst) != n:
        raise ValueError(f"need at least 4 correspondences, got {n}")
    if n == 4 and _has_collinear_triple(src[None])[0]:
        raise DegenerateInputError("degenerate input: three collinear court points")
    t_src = hartley_normalization(src)
    t_dst = hartley_normalization(dst)
    a = _design_matrix(project(t_src, src), project(t_dst, dst))
    _, sv, vt = np.linalg.svd(a)
    sv = np.concatenate([sv, np.zeros(9 - len(sv))])
    if sv[7] - sv[8] <= 1e-9 * sv[0]:
        raise DegenerateInputError("degenerate input: solution space is not one-dimensional")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    try:
        return Homography(h)
    except ValueError as exc:
        raise DegenerateInputError(f"degenerate input: {exc}") from exc


def _basis_map(p: np.ndarray) -> np.ndarray:
    """(B, 4, 2) -> (B, 3, 3) matrices taking the canonical projective basis onto the points."""
    ph = np.concatenate([p, np.ones(p.shape[:-1] + (1,))], axis=-1)
    m = np.swapaxes(ph[:, :3], 1, 2)
    ok = np.abs(np.linalg.det(m)) > 1e-12
    m = np.where(ok[:, None, None], m, np.eye(3))
    lam = np.linalg.solve(m, ph[:, 3, :, None])[..., 0]
    out = m * lam[:, None, :]
    out[~ok] = np.nan
    return out


def _batched_minimal_dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Exact homographies for a stack of 4-point samples, (B, 4, 2) -> (B, 3, 3).

    Same solution as the normalized DLT for a minimal sample, computed through
    the projective basis. Samples with three collinear points come back as NaN.
    """
    def normalize(p):
        c = p.mean(axis=1, keepdims=True)
        s = math.sqrt(2) / np.maximum(np.sqrt(((p - c) ** 2).sum(axis=-1)).mean(axis=1), 1e-300)
        t = np.zeros((len(p), 3, 3))
        t[:, 0, 0] = t[:, 1, 1] = s
        t[:, :2, 2] = -s[:, None] * c[:, 0]
        t[:, 2, 2] = 1.0
        return t, (p - c) * s[:, None, None]

    t_src, n_src = normalize(src)
    t_dst, n_dst = normalize(dst)
    a_src, a_dst = _basis_map(n_src), _basis_map(n_dst)
    with np.errstate(invalid="ignore"):
        bad = ~(np.isfinite(a_src).all(axis=(1, 2)) & np.isfinite(a_dst).all(axis=(1, 2)))
        a_src[bad] = np.eye(3)
        hn = a_dst @ np.linalg.inv(a_src)
        hn[bad] = np.nan
        return np.linalg.inv(t_dst) @ hn @ t_src


@dataclass(frozen=True)
class RansacConfig:
    reproj_threshold_px: float = 35.0
    max_iterations: int = 2000
    min_inliers: int = 4
    seed: int = 0
    adaptive: bool = False
    confidence: float = 0.999

    def __post_init__(self):
        if not self.reproj_threshold_px > 0:
            raise ValueError("reproj_threshold_px must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.min_inliers < 4:
            raise ValueError("min_inliers must be >= 4")


def reprojection_errors(h: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    err = np.linalg.norm(project(h, src) - dst, axis=1)
    return np.where(np.isnan(err), np.inf, err)


def _draw_samples(rng: np.random.Generator, src: np.ndarray, iterations: int) -> np.ndarray:
    """(iterations, 4) index samples: distinct points, no three collinear court points."""
    n = len(src)

    def rejected(idx):
        s = np.sort(idx, axis=1)
        dup = (np.diff(s, axis=1) == 0).any(axis=1)
        return dup | _has_collinear_triple(src[idx])

    idx = rng.integers(0, n, size=(iterations, 4))
    bad = np.flatnonzero(rejected(idx))
    for _ in range(1000):
        if not bad.size:
            return idx
        idx[bad] = rng.integers(0, n, size=(len(bad), 4))
        bad = bad[rejected(idx[bad])]
    return np.delete(idx, bad, axis=0)


def ransac_homography(corrs, cfg: RansacConfig = RansacConfig()
                      ) -> tuple[Optional[Homography], np.ndarray]:
    """Robust court->image homography.

    Returns ``(homography, inlier_mask)``. When no candidate reaches
    ``cfg.min_inliers`` the homography is None and the mask is all False.
    Results depend only on the inputs and ``cfg.seed``.
    """
    src, dst = _as_arrays(corrs)
    n = len(src)
    if n < 4:
        raise ValueError(f"need at least 4 correspondences, got {n}")
    none_mask = np.zeros(n, dtype=bool)
    rng = np.random.default_rng(cfg.seed)
    samples = _draw_samples(rng, src, cfg.max_iterations)
    if not len(samples):
        return None, none_mask

    thr = cfg.reproj_threshold_px
    chunk = 256 if cfg.adaptive else len(samples)
    counts_all, mean_err_all = [], []
    done = 0
    needed = len(samples)
    best_so_far = 0
    while done < min(needed, len(samples)):
        idx = samples[done:done + chunk]
        with np.errstate(all="ignore"):
            hs = _batched_minimal_dlt(src[idx], dst[idx])
            q = hs[:, :, :2] @ src.T + hs[:, :, 2:]
            w = q[:, 2]
            err = np.sqrt((q[:, 0] / w - dst[:, 0]) ** 2 + (q[:, 1] / w - dst[:, 1]) ** 2)
            valid_h = np.isfinite(hs).all(axis=(1, 2)) & (np.abs(np.linalg.det(hs)) > 0)
        err = np.where(np.isfinite(err) & (np.abs(w) > _W_EPS), err, np.inf)
        inl = err < thr
        counts = np.where(valid_h, inl.sum(axis=1), 0)
        mean_err = np.where(counts > 0, np.where(inl, err, 0).sum(axis=1) / np.maximum(counts, 1),
                            np.inf)
        counts_all.append(counts)
        mean_err_all.append(mean_err)
        done += len(idx)
        if cfg.adaptive:
            best_so_far = max(best_so_far, int(counts.max()))
            ratio = best_so_far / n
            if ratio >= 1.0:
                needed = done
            elif ratio > 0:
                needed = math.ceil(math.log(1 - cfg.confidence) / math.log(1 - ratio ** 4))

    counts = np.concatenate(counts_all)
    mean_err = np.concatenate(mean_err_all)
    # most inliers, then lowest mean inlier error, then earliest iteration
    order = np.lexsort((np.arange(len(counts)), mean_err, -counts))
    best = int(order[0])
    if counts[best] < cfg.min_inliers:
        return None, none_mask

    best_h = _batched_minimal_dlt(src[samples[best]][None], dst[samples[best]][None])[0]
    mask = reprojection_errors(best_h, src, dst) < thr
    try:
        refit = dlt_homography((src[mask], dst[mask]))
    except DegenerateInputError:
        try:
            refit = Homography(best_h)
        except ValueError:
            return None, none_mask
    final_mask = reprojection_errors(refit.h, src, dst) < thr
    if final_mask.sum() < cfg.min_inliers:
        return None, none_mask
    return refit, final_mask


def is_degenerate(h: Homography,
                  probe_a: Sequence[float] = (240.0, 270.0),
                  probe_b: Sequence[float] = (720.0, 270.0),
                  max_dist_cm: float = 1800.0) -> bool:
    """Whether two image probes land implausibly far apart on the court.

    A probe mapping to infinity also counts as degenerate.
    """
    pts = project(h.inv, np.array([probe_a, probe_b], dtype=float))
    if not np.all(np.isfinite(pts)):
        return True
    return bool(np.linalg.norm(pts[0] - pts[1]) >= max_dist_cm)


def average_homography(hs: Iterable[Homography], layout: KeypointLayout) -> Homography:
    """Homography fitted to the mean image position of every court keypoint over ``hs``."""
    hs = list(hs)
    if not hs:
        raise ValueError("average_homography needs at least one homography")
    court = layout.court_points()
    images = np.stack([apply(h, court) for h in hs])
    return dlt_homography((court, images.mean(axis=0)))
