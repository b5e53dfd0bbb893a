import numpy as np
import pytest

from box2mask.assignment import (LabelSets, boundary_foreground, overlap_assign,
                                 sets_to_mask)
from box2mask.errors import ValidationError


def grid_map(h, w, tile):
    """Regular tiling of (h, w) into tile x tile segments."""
    yy, xx = np.mgrid[0:h, 0:w]
    return ((yy // tile) * (w // tile) + (xx // tile)).astype(np.int32)


def random_map(rng, h=8, w=8, k=5):
    """Random Voronoi-ish segmentation with contiguous label ids."""
    seeds = rng.integers(0, [h, w], (k, 2))
    yy, xx = np.mgrid[0:h, 0:w]
    d = (yy[..., None] - seeds[:, 0]) ** 2 + (xx[..., None] - seeds[:, 1]) ** 2
    labels = d.argmin(axis=2)
    uniq = np.unique(labels)
    remap = np.zeros(uniq.max() + 1, dtype=np.int32)
    remap[uniq] = np.arange(uniq.size)
    return remap[labels]


def test_label_sets_must_be_disjoint():
    with pytest.raises(ValidationError):
        LabelSets(foreground=frozenset({1, 2}), background=frozenset({2, 3}))


def test_fully_inside_and_outside():
    labels = grid_map(4, 8, 4)  # two 4x4 segments
    mask = np.zeros((4, 8), dtype=np.uint8)
    mask[:, :4] = 1
    sets = overlap_assign(labels, mask, t_s=1.0)
    assert sets.foreground == {0} and sets.background == {1}
    sets = overlap_assign(labels, mask, t_s=0.0001)
    assert sets.foreground == {0} and sets.background == {1}


def test_threshold_boundary_is_inclusive():
    labels = np.array([[0, 0]], dtype=np.int32)  # one 2-pixel segment
    mask = np.array([[1, 0]], dtype=np.uint8)    # half covered
    assert 0 in overlap_assign(labels, mask, t_s=0.5).foreground
    assert 0 in overlap_assign(labels, mask, t_s=0.6).background


def test_t_s_zero_puts_everything_foreground():
    rng = np.random.default_rng(0)
    labels = random_map(rng)
    mask = np.zeros(labels.shape, dtype=np.uint8)
    sets = overlap_assign(labels, mask, t_s=0.0)
    assert sets.background == frozenset()
    assert sets.foreground == frozenset(int(v) for v in np.unique(labels))


def test_monotone_in_threshold():
    rng = np.random.default_rng(1)
    for _ in range(20):
        labels = random_map(rng)
        mask = (rng.random(labels.shape) < 0.5).astype(np.uint8)
        prev = None
        prev_area = None
        for t in (0.1, 0.3, 0.6, 0.9):
            sets = overlap_assign(labels, mask, t)
            fg = sets.foreground
            area = int(sets_to_mask(labels, sets).sum())
            if prev is not None:
                assert fg <= prev
                assert area <= prev_area
            prev, prev_area = fg, area


def test_t_s_one_keeps_only_fully_enclosed():
    rng = np.random.default_rng(8)
    for _ in range(20):
        labels = random_map(rng)
        mask = (rng.random(labels.shape) < 0.6).astype(np.uint8)
        fg = overlap_assign(labels, mask, 1.0).foreground
        for sid in np.unique(labels):
            fully_inside = bool(mask[labels == sid].all())
            assert (int(sid) in fg) == fully_inside


def test_sets_to_mask_extremes_and_oracle():
    rng = np.random.default_rng(2)
    labels = random_map(rng)
    all_ids = frozenset(int(v) for v in np.unique(labels))
    assert sets_to_mask(labels, LabelSets(all_ids, frozenset())).all()
    assert not sets_to_mask(labels, LabelSets(frozenset(), all_ids)).any()
    for _ in range(20):
        labels = random_map(rng)
        ids = sorted(int(v) for v in np.unique(labels))
        chosen = frozenset(i for i in ids if rng.random() < 0.5)
        sets = LabelSets(chosen, frozenset(ids) - chosen)
        mask = sets_to_mask(labels, sets)
        for y in range(labels.shape[0]):           # per-pixel lookup oracle
            for x in range(labels.shape[1]):
                assert mask[y, x] == (1 if labels[y, x] in chosen else 0)


def test_sets_to_mask_unknown_id_rejected():
    labels = np.zeros((2, 2), dtype=np.int32)
    with pytest.raises(ValidationError):
        sets_to_mask(labels, LabelSets(frozenset({0, 5}), frozenset()))


def test_boundary_foreground_no_background():
    labels = grid_map(4, 4, 2)
    ids = frozenset(int(v) for v in np.unique(labels))
    assert boundary_foreground(labels, LabelSets(ids, frozenset())) == frozenset()


def test_boundary_foreground_surrounded():
    labels = np.ones((5, 5), dtype=np.int32)
    labels[2, 2] = 0
    sets = LabelSets(frozenset({0}), frozenset({1}))
    assert boundary_foreground(labels, sets) == {0}


def test_boundary_foreground_center_row():
    labels = grid_map(9, 9, 3)          # 3x3 grid of nine segments
    center_row = frozenset({3, 4, 5})
    sets = LabelSets(center_row, frozenset(range(9)) - center_row)
    assert boundary_foreground(labels, sets) == center_row


def test_boundary_foreground_adjacency_oracle():
    rng = np.random.default_rng(4)
    for _ in range(20):
        labels = random_map(rng, 10, 10, 6)
        ids = sorted(int(v) for v in np.unique(labels))
        fg = frozenset(i for i in ids if rng.random() < 0.6)
        sets = LabelSets(fg, frozenset(ids) - fg)
        # oracle: scan every 4-neighbor pixel pair
        expected = set()
        h, w = labels.shape
        for y in range(h):
            for x in range(w):
                a = int(labels[y, x])
                for ny, nx in ((y + 1, x), (y, x + 1)):
                    if ny < h and nx < w:
                        b = int(labels[ny, nx])
                        if a in fg and b not in fg:
                            expected.add(a)
                        if b in fg and a not in fg:
                            expected.add(b)
        assert boundary_foreground(labels, sets) == expected
