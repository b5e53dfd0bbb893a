import math

import numpy as np
import pytest

from box2mask.crf import (CrfParams, UnaryPotentials, gibbs_energy, mean_field_refine,
                          mean_field_refine_dense, unary_from_mask)
from box2mask.errors import ParameterError


def random_case(rng, h=12, w=12, p=0.9):
    img = rng.integers(0, 256, (h, w, 3)).astype(np.uint8)
    mask = (rng.random((h, w)) < 0.5).astype(np.uint8)
    return img, mask, unary_from_mask(mask, p)


def test_unary_values():
    mask = np.array([[1, 0]], dtype=np.uint8)
    unary = unary_from_mask(mask, 0.9)
    assert unary.costs[0, 0, 0] == pytest.approx(-math.log(0.1), abs=1e-12)   # 2.3026
    assert unary.costs[0, 0, 1] == pytest.approx(-math.log(0.9), abs=1e-12)   # 0.1054
    assert unary.costs[0, 1, 0] == pytest.approx(-math.log(0.9), abs=1e-12)
    assert unary.costs[0, 1, 1] == pytest.approx(-math.log(0.1), abs=1e-12)


def test_unary_confidence_range():
    mask = np.zeros((2, 2), dtype=np.uint8)
    for bad in (0.5, 1.0, 0.2):
        with pytest.raises(ParameterError):
            unary_from_mask(mask, bad)


def test_unary_argmin_reproduces_mask():
    rng = np.random.default_rng(0)
    mask = (rng.random((9, 9)) < 0.4).astype(np.uint8)
    unary = unary_from_mask(mask, 0.7)
    assert np.array_equal(unary.costs.argmin(axis=2).astype(np.uint8), mask)


def gibbs_by_hand(labeling, unary, image, params):
    """Independent pair-loop oracle for tiny images."""
    h, w = labeling.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            total += unary.costs[y, x, labeling[y, x]]
    pix = [(y, x) for y in range(h) for x in range(w)]
    for a in range(len(pix)):
        for b in range(a + 1, len(pix)):
            (y1, x1), (y2, x2) = pix[a], pix[b]
            if labeling[y1, x1] == labeling[y2, x2]:
                continue
            d2 = (y1 - y2) ** 2 + (x1 - x2) ** 2
            c1 = image[y1, x1].astype(float)
            c2 = image[y2, x2].astype(float)
            dc2 = float(((c1 - c2) ** 2).sum())
            kg = math.exp(-d2 / (2 * params.gaussian_sxy ** 2))
            kb = math.exp(-d2 / (2 * params.bilateral_sxy ** 2)
                          - dc2 / (2 * params.bilateral_srgb ** 2))
            total += params.gaussian_weight * kg + params.bilateral_weight * kb
    return total


def test_gibbs_zero_weights_is_unary_sum():
    rng = np.random.default_rng(1)
    img, mask, unary = random_case(rng, 5, 5)
    params = CrfParams(gaussian_weight=0.0, bilateral_weight=0.0)
    expected = sum(unary.costs[y, x, mask[y, x]] for y in range(5) for x in range(5))
    assert gibbs_energy(mask, unary, img, params) == pytest.approx(expected, abs=1e-9)


def test_gibbs_uniform_labeling_has_no_pairwise():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, (4, 4, 3)).astype(np.uint8)
    mask = np.ones((4, 4), dtype=np.uint8)
    unary = unary_from_mask(mask, 0.8)
    params = CrfParams(gaussian_weight=3.0, bilateral_weight=7.0)
    expected = unary.costs[..., 1].sum()
    assert gibbs_energy(mask, unary, img, params) == pytest.approx(expected, abs=1e-9)


def test_gibbs_three_pixel_hand_case():
    # 3x1 image, mixed labels: all three pairs contribute
    img = np.array([[[10, 20, 30], [200, 40, 90], [10, 20, 30]]], dtype=np.uint8)
    labeling = np.array([[1, 0, 1]], dtype=np.uint8)
    unary = unary_from_mask(np.array([[1, 1, 0]], dtype=np.uint8), 0.75)
    params = CrfParams(gaussian_sxy=2.0, gaussian_weight=1.5,
                       bilateral_sxy=3.0, bilateral_srgb=20.0, bilateral_weight=2.5)
    got = gibbs_energy(labeling, unary, img, params)
    assert got == pytest.approx(gibbs_by_hand(labeling, unary, img, params), abs=1e-9)


def test_gibbs_random_small_cases_match_hand_loop():
    rng = np.random.default_rng(3)
    params = CrfParams(gaussian_sxy=1.5, gaussian_weight=2.0,
                       bilateral_sxy=4.0, bilateral_srgb=15.0, bilateral_weight=1.0)
    for _ in range(3):
        img, labeling, unary = random_case(rng, 3, 3, p=0.8)
        got = gibbs_energy(labeling, unary, img, params)
        assert got == pytest.approx(gibbs_by_hand(labeling, unary, img, params), abs=1e-9)


def test_gibbs_refuses_large_images():
    img = np.zeros((65, 65, 3), dtype=np.uint8)
    mask = np.zeros((65, 65), dtype=np.uint8)
    unary = unary_from_mask(mask, 0.9)
    with pytest.raises(ParameterError, match="O\\(N\\^2\\)"):
        gibbs_energy(mask, unary, img, CrfParams())


def test_zero_weights_identity_exact():
    rng = np.random.default_rng(4)
    params = CrfParams(gaussian_weight=0.0, bilateral_weight=0.0, iterations=5)
    for _ in range(20):
        img, mask, unary = random_case(rng, 16, 16)
        out, _ = mean_field_refine(img, unary, params)
        assert np.array_equal(out, mask)


def test_zero_iterations_returns_unary_argmax():
    rng = np.random.default_rng(5)
    img, mask, unary = random_case(rng, 10, 10)
    out, q = mean_field_refine(img, unary, CrfParams(iterations=0))
    assert np.array_equal(out, mask)
    assert np.allclose(q.sum(axis=-1), 1.0, atol=1e-12)


def test_majority_smoothing_on_uniform_image():
    """60/64 foreground pixels at p=0.7 with a strong bilateral kernel: the
    4 dissenters flip, on both the dense oracle and the fast path."""
    img = np.full((8, 8, 3), 120, dtype=np.uint8)
    mask = np.ones((8, 8), dtype=np.uint8)
    mask[[1, 3, 5, 6], [2, 5, 1, 6]] = 0
    unary = unary_from_mask(mask, 0.7)
    params = CrfParams(gaussian_weight=0.0, bilateral_weight=2.0, iterations=5)
    dense_out, _ = mean_field_refine_dense(img, unary, params)
    fast_out, _ = mean_field_refine(img, unary, params)
    assert dense_out.all()
    assert fast_out.all()


def test_minority_count_never_grows():
    img = np.full((8, 8, 3), 120, dtype=np.uint8)
    mask = np.ones((8, 8), dtype=np.uint8)
    mask[[1, 3, 5, 6], [2, 5, 1, 6]] = 0
    unary = unary_from_mask(mask, 0.7)
    params = CrfParams(gaussian_weight=0.0, bilateral_weight=2.0, iterations=5)
    counts = []
    mean_field_refine_dense(
        img, unary, params,
        on_iteration=lambda it, q: counts.append(int((q[..., 1] < 0.5).sum())))
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[0] <= 4


def test_marginals_normalized_every_iteration():
    rng = np.random.default_rng(6)
    img, _, unary = random_case(rng, 10, 10)
    sums = []
    mean_field_refine(img, unary, CrfParams(iterations=4),
                      on_iteration=lambda it, q: sums.append(q.sum(axis=-1)))
    assert len(sums) == 4
    for s in sums:
        assert np.abs(s - 1.0).max() < 1e-6


def test_fast_path_matches_dense_oracle():
    rng = np.random.default_rng(7)
    params = CrfParams()
    for _ in range(10):
        img, _, unary = random_case(rng)
        fast_mask, fast_q = mean_field_refine(img, unary, params)
        dense_mask, dense_q = mean_field_refine_dense(img, unary, params)
        assert np.array_equal(fast_mask, dense_mask)
        assert np.abs(fast_q - dense_q).max() <= 5e-2


def test_mean_field_reduces_energy_on_smoothing_family():
    rng = np.random.default_rng(8)
    params = CrfParams(gaussian_weight=1.0, bilateral_weight=2.0, iterations=5)
    for _ in range(6):
        img = np.full((8, 8, 3), 120, dtype=np.uint8)
        mask = (rng.random((8, 8)) < 0.8).astype(np.uint8)
        unary = unary_from_mask(mask, 0.7)
        refined, _ = mean_field_refine_dense(img, unary, params)
        e_in = gibbs_energy(mask, unary, img, params)
        e_out = gibbs_energy(refined, unary, img, params)
        assert e_out <= e_in + 1e-9


def test_dense_path_size_guard():
    img = np.zeros((70, 70, 3), dtype=np.uint8)
    unary = unary_from_mask(np.zeros((70, 70), dtype=np.uint8), 0.9)
    with pytest.raises(ParameterError):
        mean_field_refine_dense(img, unary, CrfParams())


def test_unary_potentials_validation():
    with pytest.raises(Exception):
        UnaryPotentials(np.zeros((3, 3)))
    with pytest.raises(Exception):
        UnaryPotentials(np.full((3, 3, 2), np.inf))
