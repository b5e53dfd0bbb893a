"""Superpixel embeddings and the mean foreground / background bank.

Each superpixel is cropped to its tight rectangle (pixels outside the
segment blacked out by default), embedded to a fixed-length vector, and
compared by cosine similarity against the bank's mean foreground vector
a and mean background vector b. A boundary superpixel is dropped from
the foreground exactly when C(v, b) > C(v, a); ties keep it.

Two extractors ship:
  - ColorStatsExtractor: per-channel mean and std plus a 14-bin
    histogram per channel over in-segment pixels, 48 dims, no deps.
  - OnnxFeatureExtractor: any user-supplied ONNX image model (e.g. a
    classifier with the head removed, 2048-dim global pooling output),
    described by a JSON sidecar. Needs the optional onnxruntime dep.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .assignment import LabelSets, overlap_assign
from .errors import BankError, ExtractorError, ValidationError
from .slic import SlicParams, slic_segment
from .types import BinaryMask, RgbImage, SuperpixelMap, ensure_rgb_image


class FeatureExtractor(ABC):
    """Deterministic patch -> vector map. Same patch, same vector."""

    name: str
    output_dim: int

    @abstractmethod
    def embed(self, patch: RgbImage, valid: Optional[np.ndarray] = None) -> np.ndarray:
        """Embed a patch; valid optionally marks in-segment pixels."""


class ColorStatsExtractor(FeatureExtractor):
    """Channel means, stds and 14-bin histograms over in-segment pixels."""

    name = "color_stats"
    bins = 14
    output_dim = 3 + 3 + 3 * bins  # 48

    def embed(self, patch: RgbImage, valid: Optional[np.ndarray] = None) -> np.ndarray:
        ensure_rgb_image(patch)
        if valid is None:
            pixels = patch.reshape(-1, 3)
        else:
            if valid.shape != patch.shape[:2]:
                raise ValidationError("valid mask shape does not match patch")
            pixels = patch[valid.astype(bool)]
        if pixels.shape[0] == 0:
            raise ValidationError("cannot embed an empty pixel set")
        pixels = pixels.astype(np.float64)
        n = pixels.shape[0]
        means = pixels.mean(axis=0)
        stds = pixels.std(axis=0)
        hists = []
        bin_of = (pixels.astype(np.int64) * self.bins) // 256
        for ch in range(3):
            hists.append(np.bincount(bin_of[:, ch], minlength=self.bins) / n)
        return np.concatenate([means, stds] + hists)


class OnnxFeatureExtractor(FeatureExtractor):
    """Wraps a user-supplied ONNX network; no weights ship with the package.

    The sidecar metadata JSON (default: <model>.json) must provide
    input_size [h, w], mean, std (per channel, in 0..1 units) and
    output_dim. Input layout is NCHW float32.
    """

    name = "onnx"

    def __init__(self, model_path, metadata_path=None):
        try:
            import onnxruntime  # deferred: optional dependency
        except ImportError as exc:
            raise ExtractorError(
                "the onnx extractor needs the optional 'onnxruntime' package "
                "(pip install box2mask[onnx])") from exc
        model_path = Path(model_path)
        if not model_path.is_file():
            raise ExtractorError(f"model file not found: {model_path}")
        meta_path = Path(metadata_path) if metadata_path else model_path.with_suffix(
            model_path.suffix + ".json")
        try:
            meta = json.loads(meta_path.read_text())
            self.input_size = tuple(int(v) for v in meta["input_size"])
            self.mean = np.asarray(meta["mean"], dtype=np.float32)
            self.std = np.asarray(meta["std"], dtype=np.float32)
            self.output_dim = int(meta["output_dim"])
        except FileNotFoundError as exc:
            raise ExtractorError(f"extractor metadata file not found: {meta_path}") from exc
        except (KeyError, ValueError, TypeError) as exc:
            raise ExtractorError(f"invalid extractor metadata in {meta_path}: {exc}") from exc

        opts = onnxruntime.SessionOptions()
        opts.intra_op_num_threads = 1
        opts.inter_op_num_threads = 1
        try:
            self._session = onnxruntime.InferenceSession(
                str(model_path), sess_options=opts, providers=["CPUExecutionProvider"])
        except Exception as exc:
            raise ExtractorError(f"could not load ONNX model {model_path}: {exc}") from exc
        self._input_name = self._session.get_inputs()[0].name

    def embed(self, patch: RgbImage, valid: Optional[np.ndarray] = None) -> np.ndarray:
        from PIL import Image
        ensure_rgb_image(patch)
        im = Image.fromarray(patch, mode="RGB").resize(
            (self.input_size[1], self.input_size[0]), Image.BILINEAR)
        x = np.asarray(im, dtype=np.float32) / 255.0
        x = (x - self.mean) / self.std
        x = x.transpose(2, 0, 1)[None]
        out = self._session.run(None, {self._input_name: x})[0]
        vec = np.asarray(out, dtype=np.float64).reshape(-1)
        if vec.size != self.output_dim:
            raise ExtractorError(
                f"model produced {vec.size} values, metadata promised {self.output_dim}")
        return vec


def extract_patch(image: RgbImage, labels: SuperpixelMap, segment_id: int,
                  mask_out: bool = True) -> RgbImage:
    """Tight-rectangle crop of one segment; off-segment pixels black by default."""
    patch, _ = extract_patch_and_mask(image, labels, segment_id, mask_out=mask_out)
    return patch


def extract_patch_and_mask(image: RgbImage, labels: SuperpixelMap, segment_id: int,
                           mask_out: bool = True) -> Tuple[RgbImage, np.ndarray]:
    ensure_rgb_image(image)
    if image.shape[:2] != labels.shape:
        raise ValidationError("image and superpixel map shapes differ")
    member = labels == segment_id
    if not member.any():
        raise ValidationError(f"unknown segment id {segment_id}")
    ys, xs = np.nonzero(member)
    y0, y1 = ys.min(), ys.max() + 1
    x0, x1 = xs.min(), xs.max() + 1
    patch = image[y0:y1, x0:x1].copy()
    valid = member[y0:y1, x0:x1]
    if mask_out:
        patch[~valid] = 0
    return patch, valid


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.size != v.size:
        raise ValidationError(f"dimension mismatch: {u.size} vs {v.size}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("cosine similarity of a zero-norm vector is undefined; "
                              "this usually means a degenerate (all-black) patch")
    return float(np.dot(u, v) / (nu * nv))


@dataclass
class EmbeddingBank:
    mean_foreground: np.ndarray
    mean_background: np.ndarray
    extractor_name: str
    extractor_dim: int
    source_params: Dict[str, float]
    sample_counts: Tuple[int, int]  # (foreground, background)

    def __post_init__(self):
        self.mean_foreground = np.asarray(self.mean_foreground, dtype=np.float64)
        self.mean_background = np.asarray(self.mean_background, dtype=np.float64)
        if self.mean_foreground.shape != (self.extractor_dim,) \
                or self.mean_background.shape != (self.extractor_dim,):
            raise BankError("bank vectors do not match the declared extractor dim")
        if min(self.sample_counts) < 1:
            raise BankError("bank needs at least one foreground and one background sample")


def save_bank(path, bank: EmbeddingBank) -> None:
    payload = {
        "extractor_name": bank.extractor_name,
        "extractor_dim": bank.extractor_dim,
        "mean_foreground": bank.mean_foreground.tolist(),
        "mean_background": bank.mean_background.tolist(),
        "source_params": bank.source_params,
        "sample_counts": list(bank.sample_counts),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_bank(path) -> EmbeddingBank:
    with open(path) as fh:
        raw = json.load(fh)
    try:
        return EmbeddingBank(
            mean_foreground=np.asarray(raw["mean_foreground"], dtype=np.float64),
            mean_background=np.asarray(raw["mean_background"], dtype=np.float64),
            extractor_name=str(raw["extractor_name"]),
            extractor_dim=int(raw["extractor_dim"]),
            source_params=dict(raw.get("source_params", {})),
            sample_counts=tuple(int(c) for c in raw["sample_counts"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BankError(f"invalid embedding bank file {path}: {exc}") from exc


def build_embedding_bank(dataset: Sequence[Tuple[RgbImage, BinaryMask]],
                         extractor: FeatureExtractor,
                         s: int = 250, t_s: float = 0.1,
                         slic_params: Optional[SlicParams] = None,
                         mask_patches: bool = True) -> EmbeddingBank:
    """Mean foreground / background embedding over every training superpixel.

    Defaults follow the pipeline's bank-building configuration: up to
    250 segments per image and a permissive overlap threshold of 0.1 so
    little true foreground is lost.
    """
    if len(dataset) == 0:
        raise BankError("cannot build an embedding bank from an empty dataset")
    params = slic_params or SlicParams(max_segments=s)
    dim = extractor.output_dim
    sum_fg = np.zeros(dim, dtype=np.float64)
    sum_bg = np.zeros(dim, dtype=np.float64)
    n_fg = 0
    n_bg = 0
    for image, box_mask in dataset:
        labels = slic_segment(image, params)
        sets = overlap_assign(labels, box_mask, t_s)
        for sid in sorted(sets.all_labels):
            patch, valid = extract_patch_and_mask(image, labels, sid, mask_out=mask_patches)
            vec = extractor.embed(patch, valid)
            if sid in sets.foreground:
                sum_fg += vec
                n_fg += 1
            else:
                sum_bg += vec
                n_bg += 1
    if n_fg == 0:
        raise BankError("dataset produced no foreground superpixels")
    if n_bg == 0:
        raise BankError("dataset produced no background superpixels")
    return EmbeddingBank(
        mean_foreground=sum_fg / n_fg,
        mean_background=sum_bg / n_bg,
        extractor_name=extractor.name,
        extractor_dim=dim,
        source_params={"s": params.max_segments, "t_s": t_s},
        sample_counts=(n_fg, n_bg),
    )


def reassign_boundary(image: RgbImage, labels: SuperpixelMap, sets: LabelSets,
                      boundary_ids: FrozenSet[int], extractor: FeatureExtractor,
                      bank: EmbeddingBank, mask_patches: bool = True) -> LabelSets:
    """Move boundary foreground superpixels that embed closer to background.

    Only members of boundary_ids can change side, and only from
    foreground to background; the comparison is strict, so ties stay
    foreground.
    """
    if bank.extractor_dim != extractor.output_dim:
        raise ValidationError(
            f"bank dim {bank.extractor_dim} does not match extractor dim "
            f"{extractor.output_dim}")
    if not boundary_ids <= sets.foreground:
        raise ValidationError("boundary ids must be a subset of the foreground set")
    removed: List[int] = []
    for sid in sorted(boundary_ids):
        patch, valid = extract_patch_and_mask(image, labels, sid, mask_out=mask_patches)
        vec = extractor.embed(patch, valid)
        if cosine_similarity(vec, bank.mean_background) > cosine_similarity(
                vec, bank.mean_foreground):
            removed.append(sid)
    if not removed:
        return sets
    return LabelSets(foreground=sets.foreground - frozenset(removed),
                     background=sets.background | frozenset(removed))
