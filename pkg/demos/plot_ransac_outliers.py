"""
RANSAC against gross outliers
=============================

Replace a growing share of the 91 court correspondences with random image
points and watch the inlier count and frame error.
"""

import numpy as np

from courtreg import RansacConfig, build_layout, ransac_homography
from courtreg.homography import apply, dlt_homography
from courtreg.pipeline import frame_error
from courtreg.synth import ViewSamplerConfig, sample_view_homography

layout = build_layout()
court = layout.court_points()
rng = np.random.default_rng(11)
truth = sample_view_homography(ViewSamplerConfig(), rng, layout)

for frac in (0.0, 0.1, 0.3, 0.5, 0.7):
    img = apply(truth, court) + rng.normal(0, 2.0, court.shape)
    bad = rng.choice(len(court), int(frac * len(court)), replace=False)
    img[bad] = rng.uniform([0, 0], [960, 540], (len(bad), 2))
    est, mask = ransac_homography((court, img), RansacConfig(seed=0))
    plain = dlt_homography((court, img))
    print(f"outliers {frac:4.0%}: inliers {mask.sum():2d}/91  "
          f"RANSAC error {frame_error(truth, est):8.1f} cm  plain DLT error {frame_error(truth, plain):8.1f} cm")
