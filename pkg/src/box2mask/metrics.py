"""Mask quality measures: IoU, pixelwise log loss, dataset aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .types import BinaryMask, ensure_binary_mask, ensure_same_shape


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union. Two empty masks agree perfectly: 1.0."""
    ensure_binary_mask(a)
    ensure_binary_mask(b)
    ensure_same_shape(a, b, "masks")
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return inter / union


def log_loss(pred: np.ndarray, gt: BinaryMask, eps: float = 1e-7) -> float:
    """Mean binary cross entropy of per-pixel foreground probabilities."""
    ensure_binary_mask(gt)
    pred = np.asarray(pred, dtype=np.float64)
    ensure_same_shape(pred, gt, "prediction and ground truth")
    if pred.min() < 0.0 or pred.max() > 1.0:
        raise ValidationError("predicted probabilities must lie in [0, 1]")
    p = np.clip(pred, eps, 1.0 - eps)
    y = gt.astype(np.float64)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


@dataclass(frozen=True)
class EvalReport:
    scores: Tuple[float, ...]
    mean: float
    std: float  # population std, matching mean +/- std reporting
    count: int
    empty_pairs: Tuple[int, ...]  # indices where pred and gt were both empty

    def as_dict(self) -> dict:
        return {
            "scores": list(self.scores),
            "mean": self.mean,
            "std": self.std,
            "count": self.count,
            "empty_pairs": list(self.empty_pairs),
        }


def evaluate(pred_masks: Sequence[BinaryMask], gt_masks: Sequence[BinaryMask]) -> EvalReport:
    """Pairwise IoU plus mean and population std over the dataset."""
    if len(pred_masks) != len(gt_masks):
        raise ValidationError(
            f"got {len(pred_masks)} predictions but {len(gt_masks)} ground truths")
    scores = []
    empty = []
    for i, (p, g) in enumerate(zip(pred_masks, gt_masks)):
        scores.append(iou(p, g))
        if not p.any() and not g.any():
            empty.append(i)
    arr = np.asarray(scores, dtype=np.float64)
    mean = float(arr.mean()) if arr.size else float("nan")
    std = float(arr.std()) if arr.size else float("nan")
    return EvalReport(scores=tuple(scores), mean=mean, std=std,
                      count=len(scores), empty_pairs=tuple(empty))
