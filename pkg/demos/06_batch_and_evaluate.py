"""Batch processing over a manifest, plus the evaluation harness.

The same flow is available on the command line:

    box2mask rapid    --config cfg.json --manifest manifest.json --out out/
    box2mask evaluate --pred out/ --gt gts/
"""

import json

from box2mask import PipelineConfig, evaluate
from box2mask.imageio import load_manifest, load_mask, save_image, save_mask
from box2mask.pipeline import process_dataset

from _common import ellipse_scene, outdir

out = outdir("06_batch_and_evaluate")
(out / "imgs").mkdir(exist_ok=True)
(out / "gts").mkdir(exist_ok=True)

entries = []
for i in range(4):
    img, gt = ellipse_scene(seed=200 + i, margin_y=15 + i, margin_x=19 + i)
    save_image(out / "imgs" / f"scene{i}.png", img)
    save_mask(out / "gts" / f"scene{i}.png", gt)
    entries.append({"image": f"imgs/scene{i}.png", "gt_mask": f"gts/scene{i}.png"})
(out / "manifest.json").write_text(json.dumps(entries, indent=2))

manifest = load_manifest(out / "manifest.json")
report = process_dataset(manifest, PipelineConfig(), "rapid", out / "pred")
print(json.dumps(report.summary(), indent=2))
(out / "pred" / "report.json").write_text(json.dumps(report.as_dict(), indent=2))

preds = [load_mask(out / "pred" / f"scene{i}.png") for i in range(4)]
gts = [load_mask(out / "gts" / f"scene{i}.png") for i in range(4)]
ev = evaluate(preds, gts)
print(f"dataset IoU: {ev.mean:.4f} +/- {ev.std:.4f} over {ev.count} images")
print(f"everything under {out}/")
