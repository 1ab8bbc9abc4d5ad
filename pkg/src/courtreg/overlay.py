"""Draw court template lines onto an image through a court->image homography."""
from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .court import CourtTemplate
from .homography import Homography

LINE_COLOR = (255, 0, 255)
LINE_WIDTH = 2
_MAX_COORD = 1e5


def project_polyline(h: Homography, pts: np.ndarray) -> list[np.ndarray]:
    """Project court points and split the result wherever it leaves the visible half-space."""
    q = np.c_[pts, np.ones(len(pts))] @ h.h.T
    w = q[:, 2]
    # h[2, 2] = 1 puts the court origin at w = 1; w <= 0 is the far side of the horizon
    ok = w > 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = q[:, :2] / w[:, None]
    ok &= np.all(np.abs(uv) < _MAX_COORD, axis=1)
    pieces, cur = [], []
    for good, p in zip(ok, uv):
        if good:
            cur.append(p)
        elif cur:
            pieces.append(np.array(cur))
            cur = []
    if cur:
        pieces.append(np.array(cur))
    return [p for p in pieces if len(p) >= 2]


def draw_template(image: Image.Image, h: Homography, template: CourtTemplate,
                  color=LINE_COLOR, width: int = LINE_WIDTH, samples: int = 256) -> Image.Image:
    out = image.convert("RGB").copy()
    draw = ImageDraw.Draw(out)
    for line in template.lines:
        for piece in project_polyline(h, line.sample(samples)):
            draw.line([tuple(p) for p in piece.tolist()], fill=color, width=width)
    return out
