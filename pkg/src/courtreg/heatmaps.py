"""Ground-truth class maps, center-of-mass keypoint decoding and the weighted loss."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .court import ClassRole, KeypointLayout
from .homography import Homography, project

DEFAULT_STRIDE = 4
DEFAULT_RADIUS = 10


@dataclass(frozen=True, eq=False)
class HeatmapTensor:
    """Per-pixel class scores, shape (C, H, W), at 1/stride of the input resolution."""

    scores: np.ndarray
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        s = np.asarray(self.scores)
        if s.ndim != 3 or min(s.shape) <= 0:
            raise ValueError(f"scores must be a non-empty (C, H, W) array, got shape {s.shape}")
        if not np.issubdtype(s.dtype, np.floating):
            s = s.astype(np.float32)
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        object.__setattr__(self, "scores", s)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.scores.shape

    @property
    def num_classes(self) -> int:
        return self.scores.shape[0]

    def is_normalized(self, tol: float = 1e-4) -> bool:
        s = self.scores
        return bool((s >= 0).all() and np.allclose(s.sum(axis=0), 1.0, atol=tol))


@dataclass(frozen=True, eq=False)
class ClassMap:
    """Hard per-pixel labels, shape (H, W)."""

    labels: np.ndarray
    num_classes: Optional[int] = None
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError(f"labels must be 2-D, got shape {lab.shape}")
        if not np.issubdtype(lab.dtype, np.integer):
            raise ValueError("labels must be integers")
        if lab.size and lab.min() < 0:
            raise ValueError("labels must be non-negative")
        if self.num_classes is not None and lab.size and lab.max() >= self.num_classes:
            raise ValueError(f"label {lab.max()} >= num_classes {self.num_classes}")
        object.__setattr__(self, "labels", lab)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class DecodedKeypoint:
    class_id: int
    image_xy: tuple[float, float]
    support: int
    score: float


def image_to_heatmap(xy, stride: int) -> np.ndarray:
    return (np.asarray(xy, dtype=float) - (stride - 1) / 2.0) / stride


def heatmap_to_image(xy, stride: int) -> np.ndarray:
    return stride * np.asarray(xy, dtype=float) + (stride - 1) / 2.0


def heatmap_shape(input_size: tuple[int, int], stride: int) -> tuple[int, int]:
    """(H, W) of the heatmap for an input of (width, height) pixels."""
    w, h = input_size
    return h // stride, w // stride


def render_disks(centers: Mapping[int, tuple[float, float]], shape: tuple[int, int],
                 radius_px: float, background: int,
                 labels: Optional[np.ndarray] = None) -> np.ndarray:
    """Paint one disk per class at heatmap-pixel ``centers``.

    Where disks overlap the nearer center wins; equal distances go to the
    lower class id. Pre-existing non-background labels in ``labels`` are kept
    wherever no new disk reaches.
    """
    H, W = shape
    out = np.full(shape, background, dtype=np.int64) if labels is None else labels.astype(np.int64)
    best = np.full(shape, np.inf)
    r2 = float(radius_px) ** 2
    for k in sorted(centers):
        cx, cy = centers[k]
        if not (np.isfinite(cx) and np.isfinite(cy)):
            continue
        x0, x1 = max(int(np.floor(cx - radius_px)), 0), min(int(np.ceil(cx + radius_px)), W - 1)
        y0, y1 = max(int(np.floor(cy - radius_px)), 0), min(int(np.ceil(cy + radius_px)), H - 1)
        if x0 > x1 or y0 > y1:
            continue
        yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        win = (d2 <= r2) & (d2 < best[y0:y1 + 1, x0:x1 + 1])
        out[y0:y1 + 1, x0:x1 + 1][win] = k
        best[y0:y1 + 1, x0:x1 + 1][win] = d2[win]
    return out


def projected_centers(layout: KeypointLayout, h: Homography, stride: int) -> dict[int, tuple[float, float]]:
    """Heatmap-pixel positions of every planar keypoint (points at infinity dropped)."""
    ids, xy = layout.planar_points()
    img = project(h.h, xy)
    hm = image_to_heatmap(img, stride)
    return {int(k): (float(p[0]), float(p[1])) for k, p in zip(ids, hm) if np.all(np.isfinite(p))}


def render_gt_class_map(layout: KeypointLayout, h: Homography,
                        input_size: tuple[int, int] = (960, 540),
                        stride: int = DEFAULT_STRIDE,
                        radius_px: float = DEFAULT_RADIUS) -> ClassMap:
    """Hard-label ground truth: a disk of ``radius_px`` heatmap pixels per visible keypoint."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if radius_px < 0:
        raise ValueError("radius must be >= 0")
    if abs(np.linalg.det(h.h)) <= 1e-12:
        raise ValueError("singular homography")
    shape = heatmap_shape(input_size, stride)
    centers = projected_centers(layout, h, stride)
    labels = render_disks(centers, shape, radius_px, layout.background_id)
    return ClassMap(labels.astype(np.int64), layout.num_classes, stride)


def one_hot(m: ClassMap, num_classes: Optional[int] = None) -> HeatmapTensor:
    C = num_classes or m.num_classes
    if C is None:
        raise ValueError("num_classes is required")
    scores = np.zeros((C,) + m.labels.shape, dtype=np.float32)
    np.put_along_axis(scores, m.labels[None].astype(np.intp), 1.0, axis=0)
    return HeatmapTensor(scores, m.stride)


def _winning_labels(t: HeatmapTensor | ClassMap) -> tuple[np.ndarray, Optional[np.ndarray]]:
    if isinstance(t, ClassMap):
        return t.labels, None
    # channel loop beats argmax(axis=0) on (C, H, W); strict > keeps the first maximum
    s = t.scores
    win = s[0].copy()
    lab = np.zeros(win.shape, dtype=np.int64)
    for k in range(1, s.shape[0]):
        better = s[k] > win
        win[better] = s[k][better]
        lab[better] = k
    return lab, win


def decode_keypoints(t: HeatmapTensor | ClassMap, layout: KeypointLayout,
                     min_support: int = 3) -> list[DecodedKeypoint]:
    """Center of mass of the pixels each class wins, mapped to input pixels.

    A pixel belongs to its argmax class; the centroid is weighted by the
    winning score. Classes with fewer than ``min_support`` pixels are skipped.
    A ClassMap is treated as a one-hot tensor.
    """
    C = t.num_classes if isinstance(t, HeatmapTensor) else (t.num_classes or layout.num_classes)
    if C != layout.num_classes:
        raise ValueError(f"tensor has {C} classes, layout has {layout.num_classes}")
    lab, win = _winning_labels(t)
    H, W = lab.shape
    flat = lab.ravel()
    yy, xx = np.divmod(np.arange(H * W), W)
    w = np.ones(H * W) if win is None else win.ravel().astype(float)
    count = np.bincount(flat, minlength=C)
    wsum = np.bincount(flat, weights=w, minlength=C)
    sx = np.bincount(flat, weights=w * xx, minlength=C)
    sy = np.bincount(flat, weights=w * yy, minlength=C)

    out = []
    for k in range(C):
        if k == layout.background_id or count[k] < max(min_support, 1):
            continue
        if wsum[k] > 0:
            cx, cy = sx[k] / wsum[k], sy[k] / wsum[k]
        else:
            m = flat == k
            cx, cy = xx[m].mean(), yy[m].mean()
        ix, iy = heatmap_to_image((cx, cy), t.stride)
        out.append(DecodedKeypoint(k, (float(ix), float(iy)), int(count[k]),
                                   float(wsum[k] / count[k])))
    return out


def flip_tensor(t: HeatmapTensor, perm: np.ndarray) -> HeatmapTensor:
    """Mirror a tensor left-right and relabel channels with a flip permutation."""
    return HeatmapTensor(np.ascontiguousarray(t.scores[perm][:, :, ::-1]), t.stride)


def default_class_weights(layout: KeypointLayout, keypoint: float = 1000.0,
                          background: float = 1.0) -> np.ndarray:
    return np.array([background if e.class_role == ClassRole.BACKGROUND else keypoint
                     for e in layout.entries])


def weighted_ce_loss(pred: HeatmapTensor, gt: ClassMap, alpha, strict: bool = False,
                     eps: float = 1e-12) -> float:
    """Class-weighted cross-entropy against hard labels, averaged over pixels.

    Multiply by the pixel count to get the summed form.
    """
    s = pred.scores
    if s.shape[1:] != gt.labels.shape:
        raise ValueError(f"prediction {s.shape[1:]} and ground truth {gt.labels.shape} differ in shape")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (s.shape[0],):
        raise ValueError(f"need {s.shape[0]} class weights, got {alpha.shape}")
    if gt.labels.size and gt.labels.max() >= s.shape[0]:
        raise ValueError("ground-truth label outside the prediction's classes")
    if strict and not pred.is_normalized():
        raise ValueError("prediction is not a per-pixel distribution")
    p = np.take_along_axis(s, gt.labels[None].astype(np.intp), axis=0)[0].astype(float)
    return float(np.mean(alpha[gt.labels] * -np.log(np.maximum(p, eps))))
