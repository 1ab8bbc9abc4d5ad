"""Court coordinate frame, keypoint grid and flip permutation.

Court frame: origin at the camera-side left corner, x along the court length,
y along the width, y = 0 on the camera-side sideline. Units are centimeters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class SamplingError(ValueError):
    """Invalid grid sampling parameters."""


class ClassRole(str, Enum):
    COURT = "court"
    BASKET = "basket"
    BACKGROUND = "background"


class CameraSide(str, Enum):
    Y_ZERO = "y_zero"
    Y_MAX = "y_max"


@dataclass(frozen=True)
class Segment:
    start: tuple[float, float]
    end: tuple[float, float]

    def endpoints(self) -> list[tuple[float, float]]:
        return [self.start, self.end]

    def sample(self, n: int = 64) -> np.ndarray:
        t = np.linspace(0.0, 1.0, n)[:, None]
        return (1 - t) * np.asarray(self.start) + t * np.asarray(self.end)

    def to_dict(self) -> dict:
        return {"type": "segment", "points": [list(self.start), list(self.end)]}


@dataclass(frozen=True)
class Arc:
    center: tuple[float, float]
    radius: float
    start_deg: float = 0.0
    end_deg: float = 360.0

    def endpoints(self) -> list[tuple[float, float]]:
        pts = []
        for deg in (self.start_deg, self.end_deg):
            a = math.radians(deg)
            pts.append((self.center[0] + self.radius * math.cos(a),
                        self.center[1] + self.radius * math.sin(a)))
        return pts

    def sample(self, n: int = 128) -> np.ndarray:
        a = np.radians(np.linspace(self.start_deg, self.end_deg, n))
        return np.column_stack([self.center[0] + self.radius * np.cos(a),
                                self.center[1] + self.radius * np.sin(a)])

    def to_dict(self) -> dict:
        return {"type": "arc", "center": list(self.center), "radius": self.radius,
                "start_deg": self.start_deg, "end_deg": self.end_deg}


def line_from_dict(d: dict) -> Segment | Arc:
    kind = d.get("type")
    if kind == "segment":
        (x0, y0), (x1, y1) = d["points"]
        return Segment((float(x0), float(y0)), (float(x1), float(y1)))
    if kind == "arc":
        cx, cy = d["center"]
        return Arc((float(cx), float(cy)), float(d["radius"]),
                   float(d.get("start_deg", 0.0)), float(d.get("end_deg", 360.0)))
    raise ValueError(f"unknown line type {kind!r}")


def default_lines(length_cm: float, width_cm: float) -> tuple[Segment, ...]:
    L, W = length_cm, width_cm
    return (
        Segment((0.0, 0.0), (L, 0.0)),
        Segment((L, 0.0), (L, W)),
        Segment((L, W), (0.0, W)),
        Segment((0.0, W), (0.0, 0.0)),
        Segment((L / 2, 0.0), (L / 2, W)),
    )


@dataclass(frozen=True)
class CourtTemplate:
    length_cm: float = 2800.0
    width_cm: float = 1500.0
    lines: Optional[tuple[Segment | Arc, ...]] = None

    def __post_init__(self):
        if not (self.length_cm > 0 and self.width_cm > 0):
            raise ValueError("court dimensions must be positive")
        if self.lines is None:
            object.__setattr__(self, "lines", default_lines(self.length_cm, self.width_cm))
        else:
            object.__setattr__(self, "lines", tuple(self.lines))
        tol = 1e-9 * max(self.length_cm, self.width_cm)
        for line in self.lines:
            for x, y in line.endpoints():
                if not (-tol <= x <= self.length_cm + tol and -tol <= y <= self.width_cm + tol):
                    raise ValueError(f"line endpoint ({x}, {y}) outside the court rectangle")

    def to_dict(self) -> dict:
        return {"length_cm": self.length_cm, "width_cm": self.width_cm,
                "lines": [line.to_dict() for line in self.lines]}

    @classmethod
    def from_dict(cls, d: dict) -> "CourtTemplate":
        lines = d.get("lines")
        return cls(float(d["length_cm"]), float(d["width_cm"]),
                   None if lines is None else tuple(line_from_dict(x) for x in lines))


@dataclass(frozen=True)
class SamplingSpec:
    rows: int = 7
    cols: int = 13
    w0_cm: float = 175.0
    camera_side: CameraSide = CameraSide.Y_ZERO

    def __post_init__(self):
        object.__setattr__(self, "camera_side", CameraSide(self.camera_side))
        if self.rows < 3:
            raise SamplingError(f"rows must be >= 3, got {self.rows}")
        if self.cols < 2:
            raise SamplingError(f"cols must be >= 2, got {self.cols}")
        if not self.w0_cm > 0:
            raise SamplingError(f"w0_cm must be > 0, got {self.w0_cm}")

    def to_dict(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "w0_cm": self.w0_cm,
                "camera_side": self.camera_side.value}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingSpec":
        return cls(int(d["rows"]), int(d["cols"]), float(d["w0_cm"]),
                   CameraSide(d.get("camera_side", "y_zero")))


def common_difference(W: float, N: int, w0: float) -> float:
    """Common difference of the row gaps so that N - 1 gaps starting at w0 sum to W."""
    if N < 3:
        raise SamplingError(f"N must be >= 3, got {N}")
    return 2.0 / (N - 2) * (W / (N - 1) - w0)


def perspective_offsets(W: float, N: int, w0: float) -> np.ndarray:
    """Cumulative positions of N sample rows across a court of width W.

    Gaps between consecutive rows grow arithmetically from ``w0`` at the camera
    side so that points far from the camera end up less crowded in the image.

    Raises SamplingError if N < 3, W or w0 are not positive, or some gap is
    not strictly positive.
    """
    if N < 3:
        raise SamplingError(f"N must be >= 3, got {N}")
    if not W > 0:
        raise SamplingError(f"W must be > 0, got {W}")
    if not w0 > 0:
        raise SamplingError(f"w0 must be > 0, got {w0}")
    r = common_difference(W, N, w0)
    i = np.arange(N - 1, dtype=float)
    gaps = w0 + i * r
    bad = np.flatnonzero(gaps <= 0)
    if bad.size:
        k = int(bad[0])
        raise SamplingError(f"gap {k} is non-positive ({gaps[k]:g}) for W={W:g}, N={N}, w0={w0:g}")
    # closed form of the partial sums; avoids cumsum drift
    j = np.arange(N, dtype=float)
    offsets = w0 * j + r * j * (j - 1) / 2.0
    offsets[-1] = W
    return offsets


@dataclass(frozen=True)
class KeypointEntry:
    id: int
    court_xy_cm: Optional[tuple[float, float]]
    class_role: ClassRole
    usable_for_homography: bool

    def to_dict(self) -> dict:
        return {"id": self.id,
                "xy_cm": None if self.court_xy_cm is None else list(self.court_xy_cm),
                "role": self.class_role.value,
                "usable": self.usable_for_homography}


@dataclass(frozen=True)
class KeypointLayout:
    entries: tuple[KeypointEntry, ...]
    template: CourtTemplate = field(default_factory=CourtTemplate)
    spec: SamplingSpec = field(default_factory=SamplingSpec)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.id for e in self.entries]
        if ids != list(range(len(ids))):
            raise ValueError("layout ids must be dense 0..C-1 in order")
        roles = [e.class_role for e in self.entries]
        if roles.count(ClassRole.BACKGROUND) != 1 or roles[-1] != ClassRole.BACKGROUND:
            raise ValueError("layout needs exactly one background entry, as the last id")
        for e in self.entries:
            if e.class_role == ClassRole.COURT and (e.court_xy_cm is None or not e.usable_for_homography):
                raise ValueError(f"court entry {e.id} needs coordinates and must be usable")
            if e.class_role == ClassRole.BASKET and e.usable_for_homography:
                raise ValueError(f"basket entry {e.id} cannot be used for homography")

    @property
    def num_classes(self) -> int:
        return len(self.entries)

    @property
    def background_id(self) -> int:
        return self.num_classes - 1

    def ids(self, role: ClassRole) -> np.ndarray:
        return np.array([e.id for e in self.entries if e.class_role == role], dtype=int)

    @property
    def court_ids(self) -> np.ndarray:
        return self.ids(ClassRole.COURT)

    @property
    def usable_mask(self) -> np.ndarray:
        return np.array([e.usable_for_homography for e in self.entries], dtype=bool)

    def court_points(self) -> np.ndarray:
        """(K, 2) court coordinates of the court keypoints, in id order."""
        return np.array([self.entries[i].court_xy_cm for i in self.court_ids], dtype=float)

    def planar_points(self) -> tuple[np.ndarray, np.ndarray]:
        """ids and court coordinates of every entry that has a planar position."""
        ids = [e.id for e in self.entries if e.court_xy_cm is not None]
        xy = [e.court_xy_cm for e in self.entries if e.court_xy_cm is not None]
        return np.array(ids, dtype=int), np.array(xy, dtype=float).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {"template": self.template.to_dict(), "spec": self.spec.to_dict(),
                "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "KeypointLayout":
        entries = []
        for e in d["entries"]:
            xy = e.get("xy_cm")
            entries.append(KeypointEntry(int(e["id"]),
                                         None if xy is None else (float(xy[0]), float(xy[1])),
                                         ClassRole(e["role"]), bool(e["usable"])))
        entries.sort(key=lambda e: e.id)
        return cls(tuple(entries), CourtTemplate.from_dict(d["template"]),
                   SamplingSpec.from_dict(d["spec"]))


def build_layout(template: CourtTemplate | None = None,
                 spec: SamplingSpec | None = None) -> KeypointLayout:
    """Court keypoint grid plus two basket classes and the background class.

    Court id = row * cols + col, row 0 on the camera side. Baskets follow
    (left end, right end), then background.
    """
    template = template or CourtTemplate()
    spec = spec or SamplingSpec()
    offsets = perspective_offsets(template.width_cm, spec.rows, spec.w0_cm)
    if spec.camera_side == CameraSide.Y_ZERO:
        ys = offsets
    else:
        ys = template.width_cm - offsets
    xs = np.linspace(0.0, template.length_cm, spec.cols)

    entries = []
    for row in range(spec.rows):
        for col in range(spec.cols):
            entries.append(KeypointEntry(row * spec.cols + col, (float(xs[col]), float(ys[row])),
                                         ClassRole.COURT, True))
    k = spec.rows * spec.cols
    entries.append(KeypointEntry(k, None, ClassRole.BASKET, False))
    entries.append(KeypointEntry(k + 1, None, ClassRole.BASKET, False))
    entries.append(KeypointEntry(k + 2, None, ClassRole.BACKGROUND, False))
    return KeypointLayout(tuple(entries), template, spec)


def flip_permutation(layout: KeypointLayout) -> np.ndarray:
    """Class id permutation induced by a horizontal image flip.

    ``perm[k]`` is the class that k becomes once image and court are mirrored
    along the court length. The permutation is an involution.
    """
    rows, cols = layout.spec.rows, layout.spec.cols
    perm = np.arange(layout.num_classes)
    for row in range(rows):
        for col in range(cols):
            perm[row * cols + col] = row * cols + (cols - 1 - col)
    baskets = layout.ids(ClassRole.BASKET)
    if len(baskets) == 2:
        perm[baskets[0]], perm[baskets[1]] = baskets[1], baskets[0]
    return perm
