"""
Court overlay
=============

Draw the court template through a homography, the usual visual check of a
registration result. The output PNG goes to the temporary directory.
"""

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from courtreg import build_layout
from courtreg.heatmaps import render_gt_class_map
from courtreg.overlay import draw_template
from courtreg.synth import ViewSamplerConfig, sample_view_homography

layout = build_layout()
h = sample_view_homography(ViewSamplerConfig(), np.random.default_rng(5), layout)

# paint the ground-truth keypoint disks as a backdrop, upsampled to the frame
labels = render_gt_class_map(layout, h).labels
backdrop = np.where(labels == layout.background_id, 30, 160).astype(np.uint8)
image = Image.fromarray(backdrop).resize((960, 540), Image.NEAREST).convert("RGB")

out = Path(tempfile.gettempdir()) / "courtreg_overlay.png"
draw_template(image, h, layout.template).save(out)
print("wrote", out)
