"""Core types: converting between boxes and masks, and the occupancy measure.

Boxes are inclusive pixel rectangles; masks are {0,1} uint8 arrays.
Multi-instance annotations are lists of boxes that union into one mask.
"""

from box2mask import (BoundingBox, bbox_to_mask, boxes_to_mask, mask_occupancy,
                      mask_to_bboxes)
from box2mask.imageio import save_boxes, save_mask

from _common import outdir

out = outdir("01_boxes_and_masks")

# one box becomes a rectangle of ones
box = BoundingBox(x_min=3, y_min=2, x_max=12, y_max=9)
mask = bbox_to_mask(box, width=20, height=14)
print(f"box {box.as_list()} -> mask with {mask.sum()} foreground pixels "
      f"({box.width}x{box.height} = {box.area})")
print(f"occupancy: {mask_occupancy(mask):.4f} of the 20x14 image")

# several boxes union without double counting
boxes = [box, BoundingBox(10, 6, 18, 12), BoundingBox(0, 12, 1, 13)]
union = boxes_to_mask(boxes, 20, 14)
print(f"union of {len(boxes)} boxes covers {union.sum()} pixels")

# and back: tight boxes of the 4-connected components
recovered = mask_to_bboxes(union)
print("recovered component boxes:")
for b in recovered:
    print(f"  {b.as_list()}")

save_mask(out / "union.png", union)
save_boxes(out / "boxes.json", {"union.png": recovered})
print(f"wrote {out}/union.png and {out}/boxes.json")
