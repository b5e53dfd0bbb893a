"""Assign superpixels to foreground / background by box-mask overlap.

A segment goes foreground when the fraction of its own pixels covered by
the box mask is >= the threshold t_s; the denominator is the segment's
area, so the rule is scale-free across segment sizes. Raising t_s can
only shrink the foreground set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet

import numpy as np

from .errors import ParameterError, ValidationError
from .types import BinaryMask, SuperpixelMap, ensure_binary_mask, ensure_same_shape


@dataclass(frozen=True)
class LabelSets:
    foreground: FrozenSet[int]
    background: FrozenSet[int]

    def __post_init__(self):
        overlap = self.foreground & self.background
        if overlap:
            raise ValidationError(f"segments in both sets: {sorted(overlap)[:8]}")

    @property
    def all_labels(self) -> FrozenSet[int]:
        return self.foreground | self.background

    def validate_for(self, labels: SuperpixelMap) -> None:
        present = frozenset(int(v) for v in np.unique(labels))
        if self.all_labels != present:
            missing = present - self.all_labels
            extra = self.all_labels - present
            raise ValidationError(
                f"label sets do not partition the map (missing={sorted(missing)[:8]}, "
                f"unknown={sorted(extra)[:8]})")


def overlap_assign(labels: SuperpixelMap, box_mask: BinaryMask, t_s: float) -> LabelSets:
    """Foreground iff covered fraction >= t_s (inclusive, per the shrink rule)."""
    ensure_binary_mask(box_mask)
    ensure_same_shape(labels, box_mask, "superpixel map and mask")
    if not 0.0 <= t_s <= 1.0:
        raise ParameterError(f"t_s must be in [0, 1], got {t_s}")

    flat = labels.ravel()
    k = int(flat.max()) + 1
    total = np.bincount(flat, minlength=k)
    inside = np.bincount(flat, weights=box_mask.ravel().astype(np.float64), minlength=k)
    present = total > 0
    frac = np.zeros(k, dtype=np.float64)
    frac[present] = inside[present] / total[present]

    fg = frozenset(int(i) for i in np.nonzero(present & (frac >= t_s))[0])
    bg = frozenset(int(i) for i in np.nonzero(present & (frac < t_s))[0])
    return LabelSets(foreground=fg, background=bg)


def sets_to_mask(labels: SuperpixelMap, sets: LabelSets) -> BinaryMask:
    """Binary mask with 1 exactly on pixels whose segment is foreground."""
    sets.validate_for(labels)
    k = int(labels.max()) + 1
    lut = np.zeros(k, dtype=np.uint8)
    for f in sets.foreground:
        lut[f] = 1
    return lut[labels]


def boundary_foreground(labels: SuperpixelMap, sets: LabelSets) -> FrozenSet[int]:
    """Foreground segments with at least one pixel 4-adjacent to background."""
    sets.validate_for(labels)
    k = int(labels.max()) + 1
    is_fg = np.zeros(k, dtype=bool)
    for f in sets.foreground:
        is_fg[f] = True

    out: set[int] = set()
    for a, b in ((labels[:-1, :], labels[1:, :]), (labels[:, :-1], labels[:, 1:])):
        fa, fb = is_fg[a], is_fg[b]
        out.update(int(v) for v in np.unique(a[fa & ~fb]))
        out.update(int(v) for v in np.unique(b[fb & ~fa]))
    return frozenset(out)
