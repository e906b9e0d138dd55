"""Binary image inpainting through the fidelity flow.

A striped test card loses a square patch; the damaged pixels are pinned
nowhere while the intact ones are pulled strongly toward the known
image.  The conserved dynamics then continues the stripes through the
hole.  The damaged, restored, and ground-truth images are written next
to this script.
"""

import os
import warnings

import numpy as np

from nlch import (FidelitySpec, ImageGray, InpaintParams, Mask, inpaint,
                  write_pgm)

out_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), "output")
os.makedirs(out_dir, exist_ok=True)

# vertical stripes of period 16 on a 64 x 64 card
col = ((np.arange(64) // 8) % 2) * 255
truth = ImageGray(64, 64, np.tile(col.astype(np.uint8), (64, 1)))

# centered 12 x 12 hole, filled with mid-gray so the loss is visible
damaged = np.zeros((64, 64), dtype=bool)
damaged[26:38, 26:38] = True
mask = Mask(64, 64, damaged)
px = truth.pixels.copy()
px[damaged] = 128
broken = ImageGray(64, 64, px)
write_pgm(os.path.join(out_dir, "stripes_broken.pgm"), broken)

# the step cap is the intended stop here, so silence the advisory
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    result = inpaint(broken, mask, FidelitySpec(lambda0=1e3),
                     InpaintParams(max_steps=20_000))
print("stopped by %s after %d steps" % (result.reason, result.steps))

agree = result.image.pixels == truth.pixels
print("pixel agreement: %.4f overall, %.4f inside the damage"
      % (agree.mean(), agree[damaged].mean()))

write_pgm(os.path.join(out_dir, "stripes_restored.pgm"), result.image)
write_pgm(os.path.join(out_dir, "stripes_truth.pgm"), truth)
print("wrote images to", out_dir)
