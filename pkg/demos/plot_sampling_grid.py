"""
Perspective-aware keypoint rows
===============================

Rows of court keypoints are spaced as an arithmetic progression along the
court width, tighter near the camera and wider far from it, so that their
spacing in the image comes out roughly even.
"""

import numpy as np

from courtreg import build_layout, perspective_offsets
from courtreg.court import common_difference
from courtreg.homography import apply
from courtreg.synth import ViewSamplerConfig, sample_view_homography

# default court: 15 m wide, 7 rows, first gap 1.75 m
offsets = perspective_offsets(1500, 7, 175)
print("row offsets (cm):", offsets)
print("gaps (cm):       ", np.diff(offsets))
print("common difference:", common_difference(1500, 7, 175), "cm")

# a first gap equal to the mean gap collapses to a uniform grid
print("uniform gaps:", np.diff(perspective_offsets(1500, 7, 250)))

###############################################################################
# Compare image-space row spacing for the two grids under one broadcast view.

layout = build_layout()
h = sample_view_homography(ViewSamplerConfig(), np.random.default_rng(3), layout)
mid = 1400.0
for name, off in (("perspective", offsets), ("uniform", perspective_offsets(1500, 7, 250))):
    rows = apply(h, np.c_[np.full(len(off), mid), off])[:, 1]
    print(f"{name:12s} image row gaps (px):", np.round(-np.diff(rows), 1))
