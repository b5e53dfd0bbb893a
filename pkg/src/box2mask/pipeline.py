"""End-to-end refinement pipelines and batch processing.

rapid path:  superpixels -> box-overlap thresholding -> CRF smoothing
robust path: same, plus one or more boundary passes that drop foreground
             superpixels embedding closer to the background bank vector
             before the CRF runs.

Both end with the fallback guards: if the box occupies too little of the
image, or the pseudo-mask strays too far from the box, the original box
mask is returned untouched.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .assignment import (LabelSets, boundary_foreground, overlap_assign, sets_to_mask)
from .crf import CrfParams, mean_field_refine, unary_from_mask
from .embedding import (ColorStatsExtractor, EmbeddingBank, FeatureExtractor,
                        OnnxFeatureExtractor, reassign_boundary)
from .errors import ConfigError, ValidationError
from .imageio import DatasetManifest, ManifestEntry, load_image, load_mask, save_mask
from .metrics import iou
from .slic import SlicParams, slic_segment
from .types import (BinaryMask, RgbImage, SuperpixelMap, boxes_to_mask,
                    ensure_binary_mask, ensure_rgb_image, ensure_same_shape,
                    mask_occupancy, mask_to_bboxes)


@dataclass(frozen=True)
class GuardParams:
    min_occupancy: float = 0.1
    min_iou: float = 0.1

    def __post_init__(self):
        for name in ("min_occupancy", "min_iou"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"guard {name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class EmbeddingConfig:
    extractor: str = "color_stats"
    model_path: Optional[str] = None
    metadata_path: Optional[str] = None
    bank_path: Optional[str] = None
    mask_patches: bool = True
    bank_segments: int = 250
    bank_t_s: float = 0.1

    def __post_init__(self):
        if self.extractor not in ("color_stats", "onnx"):
            raise ConfigError(f"unknown extractor {self.extractor!r} "
                              "(expected 'color_stats' or 'onnx')")
        if not 0.0 <= self.bank_t_s <= 1.0:
            raise ConfigError(f"bank_t_s must be in [0, 1], got {self.bank_t_s}")


@dataclass(frozen=True)
class PipelineConfig:
    slic: SlicParams = field(default_factory=SlicParams)
    t_s: float = 0.6
    crf: CrfParams = field(default_factory=CrfParams)
    guards: GuardParams = field(default_factory=GuardParams)
    robust_iterations: int = 1
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)

    def __post_init__(self):
        if not 0.0 <= self.t_s <= 1.0:
            raise ConfigError(f"t_s must be in [0, 1], got {self.t_s}")
        if self.robust_iterations < 1:
            raise ConfigError(f"robust_iterations must be >= 1, got {self.robust_iterations}")

    def to_dict(self) -> dict:
        return {
            "slic": {
                "max_segments": self.slic.max_segments,
                "compactness": self.slic.compactness,
                "max_iterations": self.slic.max_iterations,
                "enforce_connectivity": self.slic.enforce_connectivity,
                "min_segment_fraction": self.slic.min_segment_fraction,
            },
            "t_s": self.t_s,
            "crf": {
                "gaussian_sxy": self.crf.gaussian_sxy,
                "gaussian_weight": self.crf.gaussian_weight,
                "bilateral_sxy": self.crf.bilateral_sxy,
                "bilateral_srgb": self.crf.bilateral_srgb,
                "bilateral_weight": self.crf.bilateral_weight,
                "iterations": self.crf.iterations,
                "unary_confidence": self.crf.unary_confidence,
                "bilateral_grid_scale": self.crf.bilateral_grid_scale,
                "bilateral_grid_order": self.crf.bilateral_grid_order,
            },
            "guards": {
                "min_occupancy": self.guards.min_occupancy,
                "min_iou": self.guards.min_iou,
            },
            "robust_iterations": self.robust_iterations,
            "embedding": {
                "extractor": self.embedding.extractor,
                "model_path": self.embedding.model_path,
                "metadata_path": self.embedding.metadata_path,
                "bank_path": self.embedding.bank_path,
                "mask_patches": self.embedding.mask_patches,
                "bank_segments": self.embedding.bank_segments,
                "bank_t_s": self.embedding.bank_t_s,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        """Build a config from a (possibly partial) dict; unknown keys error."""
        defaults = cls()
        base = defaults.to_dict()
        _reject_unknown(raw, base, where="config")
        for section in ("slic", "crf", "guards", "embedding"):
            if section in raw:
                _reject_unknown(raw[section], base[section], where=f"config.{section}")

        def merged(section: str) -> dict:
            out = dict(base[section])
            out.update(raw.get(section, {}))
            return out

        try:
            return cls(
                slic=SlicParams(**merged("slic")),
                t_s=raw.get("t_s", base["t_s"]),
                crf=CrfParams(**merged("crf")),
                guards=GuardParams(**merged("guards")),
                robust_iterations=raw.get("robust_iterations", base["robust_iterations"]),
                embedding=EmbeddingConfig(**merged("embedding")),
            )
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc


def _reject_unknown(raw: dict, known: dict, where: str) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def make_extractor(cfg: EmbeddingConfig) -> FeatureExtractor:
    if cfg.extractor == "color_stats":
        return ColorStatsExtractor()
    if cfg.model_path is None:
        raise ConfigError("the onnx extractor needs embedding.model_path")
    return OnnxFeatureExtractor(cfg.model_path, cfg.metadata_path)


# ----------------------------
# guards
# ----------------------------

def guard_decision(pseudo: BinaryMask, box_mask: BinaryMask,
                   cfg: PipelineConfig) -> Optional[str]:
    """Name of the triggered guard, or None when the pseudo-mask stands."""
    ensure_binary_mask(pseudo)
    ensure_binary_mask(box_mask)
    ensure_same_shape(pseudo, box_mask, "pseudo and box masks")
    if mask_occupancy(box_mask) < cfg.guards.min_occupancy:
        return "occupancy"
    if iou(pseudo, box_mask) < cfg.guards.min_iou:
        return "iou"
    return None


def apply_guards(pseudo: BinaryMask, box_mask: BinaryMask,
                 cfg: PipelineConfig) -> BinaryMask:
    """Return pseudo, or the untouched box mask when a guard trips."""
    return box_mask if guard_decision(pseudo, box_mask, cfg) else pseudo


# ----------------------------
# single-image pipelines
# ----------------------------

@dataclass
class RefineResult:
    mask: BinaryMask                 # after guards
    marginals: np.ndarray            # (H, W, 2) CRF output
    superpixels: SuperpixelMap
    sets: LabelSets                  # post boundary passes, pre CRF
    pre_crf_mask: BinaryMask
    guard: Optional[str]             # None, "occupancy" or "iou"


BoundaryPassHook = Callable[[int, frozenset, LabelSets, LabelSets], None]


def _refine_common(image: RgbImage, box_mask: BinaryMask, cfg: PipelineConfig,
                   sets_transform) -> RefineResult:
    ensure_rgb_image(image)
    ensure_binary_mask(box_mask)
    ensure_same_shape(image, box_mask, "image and box mask")
    if not box_mask.any():
        raise ValidationError("box mask is empty; nothing to refine")

    labels = slic_segment(image, cfg.slic)
    sets = overlap_assign(labels, box_mask, cfg.t_s)
    sets = sets_transform(labels, sets)
    pre_mask = sets_to_mask(labels, sets)
    unary = unary_from_mask(pre_mask, cfg.crf.unary_confidence)
    refined, marginals = mean_field_refine(image, unary, cfg.crf)
    guard = guard_decision(refined, box_mask, cfg)
    final = box_mask if guard else refined
    return RefineResult(mask=final, marginals=marginals, superpixels=labels,
                        sets=sets, pre_crf_mask=pre_mask, guard=guard)


def rapid_refine(image: RgbImage, box_mask: BinaryMask,
                 cfg: Optional[PipelineConfig] = None) -> RefineResult:
    cfg = cfg or PipelineConfig()
    return _refine_common(image, box_mask, cfg, lambda labels, sets: sets)


def rapid_boxshrink(image: RgbImage, box_mask: BinaryMask,
                    cfg: Optional[PipelineConfig] = None) -> BinaryMask:
    """Superpixel thresholding + CRF smoothing + guards."""
    return rapid_refine(image, box_mask, cfg).mask


def robust_refine(image: RgbImage, box_mask: BinaryMask, bank: EmbeddingBank,
                  cfg: Optional[PipelineConfig] = None,
                  extractor: Optional[FeatureExtractor] = None,
                  on_pass: Optional[BoundaryPassHook] = None) -> RefineResult:
    cfg = cfg or PipelineConfig()
    extractor = extractor or make_extractor(cfg.embedding)
    if bank.extractor_name != extractor.name:
        raise ConfigError(f"bank was built with extractor {bank.extractor_name!r} "
                          f"but the config selects {extractor.name!r}")
    if bank.extractor_dim != extractor.output_dim:
        raise ConfigError(f"bank dim {bank.extractor_dim} does not match extractor "
                          f"dim {extractor.output_dim}")

    def passes(labels: SuperpixelMap, sets: LabelSets) -> LabelSets:
        for i in range(cfg.robust_iterations):
            fo = boundary_foreground(labels, sets)
            new_sets = reassign_boundary(image, labels, sets, fo, extractor, bank,
                                         mask_patches=cfg.embedding.mask_patches)
            if on_pass is not None:
                on_pass(i, fo, sets, new_sets)
            sets = new_sets
        return sets

    return _refine_common(image, box_mask, cfg, passes)


def robust_boxshrink(image: RgbImage, box_mask: BinaryMask, bank: EmbeddingBank,
                     cfg: Optional[PipelineConfig] = None,
                     extractor: Optional[FeatureExtractor] = None) -> BinaryMask:
    """Boundary-superpixel cleanup against the embedding bank, then CRF + guards."""
    return robust_refine(image, box_mask, bank, cfg, extractor).mask


# ----------------------------
# dataset batch processing
# ----------------------------

@dataclass
class RunEntry:
    image: str
    status: str                      # "ok" or "error"
    seconds: float = 0.0
    guard: Optional[str] = None
    output: Optional[str] = None
    iou_pseudo_gt: Optional[float] = None
    iou_box_gt: Optional[float] = None
    message: Optional[str] = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class RunReport:
    variant: str
    config: dict
    entries: List[RunEntry]

    @property
    def n_failed(self) -> int:
        return sum(1 for e in self.entries if e.status != "ok")

    def summary(self) -> dict:
        ok = [e for e in self.entries if e.status == "ok"]
        out: Dict[str, object] = {
            "images": len(self.entries),
            "ok": len(ok),
            "failed": self.n_failed,
            "guard_triggers": sum(1 for e in ok if e.guard),
            "total_seconds": round(sum(e.seconds for e in self.entries), 3),
        }
        scored = [e.iou_pseudo_gt for e in ok if e.iou_pseudo_gt is not None]
        if scored:
            out["mean_iou_pseudo_gt"] = float(np.mean(scored))
            out["mean_iou_box_gt"] = float(np.mean(
                [e.iou_box_gt for e in ok if e.iou_box_gt is not None]))
        return out

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "config": self.config,
            "summary": self.summary(),
            "entries": [e.as_dict() for e in self.entries],
        }


def entry_box_mask(entry: ManifestEntry, shape: Tuple[int, int]) -> BinaryMask:
    """Union of the entry's boxes; derived from the GT mask when absent."""
    h, w = shape
    if entry.boxes:
        return boxes_to_mask(entry.boxes, w, h)
    gt = load_mask(entry.gt_mask_path)
    if gt.shape != (h, w):
        raise ValidationError(f"gt mask {entry.gt_mask_path} shape {gt.shape} "
                              f"does not match image {(h, w)}")
    boxes = mask_to_bboxes(gt)
    if not boxes:
        raise ValidationError(f"gt mask {entry.gt_mask_path} is empty")
    return boxes_to_mask(boxes, w, h)


def _process_entry(entry: ManifestEntry, cfg: PipelineConfig, variant: str,
                   bank: Optional[EmbeddingBank], out_dir: str,
                   save_marginals: bool) -> RunEntry:
    name = Path(entry.image_path).name
    started = time.perf_counter()
    try:
        image = load_image(entry.image_path)
        box_mask = entry_box_mask(entry, image.shape[:2])
        if variant == "rapid":
            result = rapid_refine(image, box_mask, cfg)
        elif variant == "robust":
            if bank is None:
                raise ConfigError("robust processing needs an embedding bank")
            result = robust_refine(image, box_mask, bank, cfg)
        else:
            raise ConfigError(f"unknown variant {variant!r}")

        out_path = Path(out_dir) / (Path(name).stem + ".png")
        save_mask(out_path, result.mask)
        if save_marginals:
            from .viz import save_probability_png
            save_probability_png(Path(out_dir) / (Path(name).stem + "_marginals.png"),
                                 result.marginals[..., 1])

        run = RunEntry(image=name, status="ok", guard=result.guard,
                       output=str(out_path), seconds=time.perf_counter() - started)
        if entry.gt_mask_path is not None:
            gt = load_mask(entry.gt_mask_path)
            run.iou_pseudo_gt = iou(result.mask, gt)
            run.iou_box_gt = iou(box_mask, gt)
        return run
    except Exception as exc:  # per-image fault isolation: the run continues
        return RunEntry(image=name, status="error", seconds=time.perf_counter() - started,
                        message=f"{type(exc).__name__}: {exc}")


def process_dataset(manifest: DatasetManifest, cfg: PipelineConfig, variant: str,
                    out_dir, bank: Optional[EmbeddingBank] = None,
                    workers: int = 1, save_marginals: bool = False) -> RunReport:
    """Refine every manifest entry, write mask PNGs, aggregate a report.

    Failures are recorded per image and do not stop the run. Results are
    reported in manifest order no matter how many workers ran.
    """
    if variant not in ("rapid", "robust"):
        raise ConfigError(f"unknown variant {variant!r}")
    if variant == "robust" and bank is None:
        raise ConfigError("robust processing needs an embedding bank")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # never overwrite inputs: output masks reuse the image stem
    for entry in manifest:
        target = (out_dir / (Path(entry.image_path).stem + ".png")).resolve()
        inputs = {Path(entry.image_path).resolve()}
        if entry.gt_mask_path is not None:
            inputs.add(Path(entry.gt_mask_path).resolve())
        if target in inputs:
            raise ConfigError(f"output {target} would overwrite an input file; "
                              "choose a different --out directory")

    work = partial(_process_entry, cfg=cfg, variant=variant, bank=bank,
                   out_dir=str(out_dir), save_marginals=save_marginals)
    if workers <= 1 or len(manifest) <= 1:
        entries = [work(e) for e in manifest]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(work, manifest.entries))
    return RunReport(variant=variant, config=cfg.to_dict(), entries=entries)
