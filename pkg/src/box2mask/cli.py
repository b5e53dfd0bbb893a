"""Command line front end.

Subcommands: derive-boxes, rapid, robust, build-bank, evaluate, overlay.
Config is a JSON file (see PipelineConfig.to_dict for the schema); every
key is optional and falls back to the documented default. The config
path may also come from the BOX2MASK_CONFIG environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .embedding import build_embedding_bank, load_bank, save_bank
from .errors import Box2MaskError, ConfigError
from .imageio import load_image, load_manifest, load_mask, save_boxes, save_image
from .metrics import evaluate
from .pipeline import (PipelineConfig, entry_box_mask, make_extractor,
                       process_dataset)
from .slic import slic_segment
from .types import mask_to_bboxes
from .viz import overlay

CONFIG_ENV = "BOX2MASK_CONFIG"


def load_config(path: str | None) -> PipelineConfig:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return PipelineConfig()
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return PipelineConfig.from_dict(raw)


def _write_report(out_dir: Path, report_dict: dict) -> None:
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report_dict, fh, indent=2)
        fh.write("\n")


def _print_run_table(report) -> None:
    print(f"{'image':32s} {'status':7s} {'sec':>6s} {'guard':9s} {'IoU(gt)':>8s}")
    for e in report.entries:
        iou_s = f"{e.iou_pseudo_gt:.4f}" if e.iou_pseudo_gt is not None else "-"
        print(f"{e.image[:32]:32s} {e.status:7s} {e.seconds:6.2f} "
              f"{(e.guard or '-'):9s} {iou_s:>8s}")
        if e.message:
            print(f"    {e.message}")
    for key, value in report.summary().items():
        print(f"{key}: {value}")


def _cmd_derive_boxes(args) -> int:
    mask_dir = Path(args.masks)
    paths = sorted(mask_dir.glob("*.png"))
    if not paths:
        print(f"no .png masks found in {mask_dir}", file=sys.stderr)
        return 1
    boxes_by_image = {}
    failures = 0
    for p in paths:
        try:
            mask = load_mask(p)
        except Exception as exc:
            print(f"{p.name}: {type(exc).__name__}: {exc}", file=sys.stderr)
            failures += 1
            continue
        boxes = mask_to_bboxes(mask)
        if not boxes:
            print(f"warning: {p.name} has no foreground, writing empty box list",
                  file=sys.stderr)
        boxes_by_image[p.name] = boxes
    save_boxes(args.out, boxes_by_image)
    print(f"wrote boxes for {len(boxes_by_image)} masks to {args.out}"
          + (f" ({failures} failed)" if failures else ""))
    return 1 if failures else 0


def _run_variant(args, variant: str) -> int:
    cfg = load_config(args.config)
    manifest = load_manifest(args.manifest)
    bank = None
    if variant == "robust":
        bank_path = args.bank or cfg.embedding.bank_path
        if not bank_path:
            raise ConfigError("robust needs a bank: pass --bank or set "
                              "embedding.bank_path in the config")
        bank = load_bank(bank_path)
        extractor = make_extractor(cfg.embedding)
        if bank.extractor_name != extractor.name or bank.extractor_dim != extractor.output_dim:
            raise ConfigError(
                f"bank ({bank.extractor_name}, dim {bank.extractor_dim}) does not match "
                f"configured extractor ({extractor.name}, dim {extractor.output_dim})")
    out_dir = Path(args.out)
    report = process_dataset(manifest, cfg, variant, out_dir, bank=bank,
                             workers=args.workers, save_marginals=args.save_marginals)
    _write_report(out_dir, report.as_dict())
    _print_run_table(report)
    return 0 if report.n_failed == 0 else 1


def _cmd_build_bank(args) -> int:
    cfg = load_config(args.config)
    manifest = load_manifest(args.manifest)
    extractor = make_extractor(cfg.embedding)
    dataset = []
    for entry in manifest:
        image = load_image(entry.image_path)
        dataset.append((image, entry_box_mask(entry, image.shape[:2])))
    bank = build_embedding_bank(
        dataset, extractor,
        s=cfg.embedding.bank_segments, t_s=cfg.embedding.bank_t_s,
        mask_patches=cfg.embedding.mask_patches)
    save_bank(args.out, bank)
    fg, bg = bank.sample_counts
    print(f"bank written to {args.out} ({fg} foreground / {bg} background superpixels, "
          f"extractor {bank.extractor_name}, dim {bank.extractor_dim})")
    return 0


def _cmd_evaluate(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    names = sorted(p.name for p in pred_dir.glob("*.png")
                   if not p.stem.endswith("_marginals"))
    if not names:
        print(f"no predictions found in {pred_dir}", file=sys.stderr)
        return 1
    preds, gts, used = [], [], []
    missing = []
    for name in names:
        gt_path = gt_dir / name
        if not gt_path.exists():
            missing.append(name)
            continue
        preds.append(load_mask(pred_dir / name))
        gts.append(load_mask(gt_path))
        used.append(name)
    if missing:
        print(f"warning: no ground truth for {len(missing)} masks "
              f"(e.g. {missing[:3]})", file=sys.stderr)
    report = evaluate(preds, gts)
    print(f"IoU over {report.count} pairs: {report.mean:.4f} +/- {report.std:.4f}")
    payload = report.as_dict()
    payload["images"] = used
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("image,iou\n")
            for name, score in zip(used, report.scores):
                fh.write(f"{name},{score:.6f}\n")
    return 0


def _parse_color(text: str):
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 3 or not all(0 <= v <= 255 for v in parts):
        raise ConfigError(f"colors are R,G,B with values 0..255, got {text!r}")
    return tuple(parts)


def _cmd_overlay(args) -> int:
    cfg = load_config(args.config)
    manifest = load_manifest(args.manifest)
    boundary_color = _parse_color(args.boundary_color)
    contour_color = _parse_color(args.contour_color)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for entry in manifest:
        name = Path(entry.image_path).name
        try:
            image = load_image(entry.image_path)
            labels = slic_segment(image, cfg.slic)
            if args.masks:
                mask = load_mask(Path(args.masks) / (Path(name).stem + ".png"))
            else:
                mask = entry_box_mask(entry, image.shape[:2])
            rendered = overlay(image, labels=labels, mask=mask,
                               boundary_color=boundary_color,
                               contour_color=contour_color)
            save_image(out_dir / (Path(name).stem + "_overlay.png"), rendered)
        except Exception as exc:
            print(f"{name}: {type(exc).__name__}: {exc}", file=sys.stderr)
            failures += 1
    print(f"wrote {len(manifest) - failures} overlays to {out_dir}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="box2mask",
        description="Refine bounding-box annotations into segmentation pseudo-masks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive-boxes", help="tight boxes from a directory of GT masks")
    p.add_argument("--masks", required=True, help="directory of mask PNGs")
    p.add_argument("--out", required=True, help="output boxes JSON")

    for variant in ("rapid", "robust"):
        p = sub.add_parser(variant, help=f"{variant} pseudo-mask generation")
        p.add_argument("--config", help=f"pipeline config JSON (or ${CONFIG_ENV})")
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--save-marginals", action="store_true",
                       help="also dump CRF foreground marginals as grayscale PNGs")
        if variant == "robust":
            p.add_argument("--bank", help="embedding bank JSON")

    p = sub.add_parser("build-bank", help="mean fg/bg embedding bank from a dataset")
    p.add_argument("--config", help=f"pipeline config JSON (or ${CONFIG_ENV})")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output bank JSON")

    p = sub.add_parser("evaluate", help="IoU of predicted masks against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted masks")
    p.add_argument("--gt", required=True, help="directory of ground-truth masks")
    p.add_argument("--out", help="write report JSON here")
    p.add_argument("--csv", help="write per-image scores as CSV")

    p = sub.add_parser("overlay", help="superpixel boundary + mask contour rendering")
    p.add_argument("--config", help=f"pipeline config JSON (or ${CONFIG_ENV})")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--masks", help="directory of masks to outline (default: box masks)")
    p.add_argument("--boundary-color", default="255,230,0", metavar="R,G,B",
                   help="superpixel boundary color (default 255,230,0)")
    p.add_argument("--contour-color", default="255,0,0", metavar="R,G,B",
                   help="mask contour color (default 255,0,0)")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "derive-boxes": _cmd_derive_boxes,
        "rapid": lambda a: _run_variant(a, "rapid"),
        "robust": lambda a: _run_variant(a, "robust"),
        "build-bank": _cmd_build_bank,
        "evaluate": _cmd_evaluate,
        "overlay": _cmd_overlay,
    }
    try:
        return handlers[args.command](args)
    except Box2MaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
