"""Biharmonic fill: exactness on smooth data, linearity, fallbacks."""

import logging

import numpy as np
import pytest

import wgain.baseline as baseline
from wgain.baseline import biharmonic_inpaint
from wgain.errors import ValidationError
from wgain.masks import Mask, gen_center_square_mask, gen_noise_mask
from wgain.seeding import named_stream

from conftest import random_image


def affine_ramp(side, a=0.1, bi=0.003, bj=0.005):
    i, j = np.mgrid[0:side, 0:side].astype(np.float64)
    plane = a + bi * i + bj * j
    return np.stack([plane, plane * 0.9 + 0.02, plane * 1.1], axis=2)


def hole_mask(side, r0, r1, c0, c1):
    bits = np.ones((side, side), dtype=np.uint8)
    bits[r0:r1, c0:c1] = 0
    return Mask(bits)


class TestExactness:
    def test_no_missing_pixels_is_identity(self, rng):
        x = random_image(rng, 16)
        out = biharmonic_inpaint(x, Mask(np.ones((16, 16), dtype=np.uint8)))
        assert np.array_equal(out, x)
        assert out is not x

    def test_affine_interior_hole_reconstructed(self):
        """Affine images are in the operator's null space, so an interior hole
        comes back to within solver tolerance."""
        truth = affine_ramp(32)
        mask = hole_mask(32, 12, 20, 10, 22)
        out = biharmonic_inpaint(truth, mask)
        hole = mask.bits == 0
        assert np.abs(out[hole] - truth[hole]).max() <= 1e-6

    def test_affine_multiple_separate_holes(self):
        truth = affine_ramp(40)
        bits = np.ones((40, 40), dtype=np.uint8)
        bits[5:10, 5:10] = 0
        bits[25:33, 22:30] = 0
        out = biharmonic_inpaint(truth, Mask(bits))
        assert np.abs(out[bits == 0] - truth[bits == 0]).max() <= 1e-6

    def test_valid_pixels_bit_exact(self, rng):
        x = random_image(rng, 24)
        mask = gen_noise_mask(24, 24, 0.7, rng)
        out = biharmonic_inpaint(x, mask)
        assert np.array_equal(out[mask.bits == 1], x[mask.bits == 1])

    def test_output_clamped_to_unit_range(self, rng):
        x = random_image(rng, 24)
        mask = gen_center_square_mask(24, 24, 12)
        out = biharmonic_inpaint(x, mask)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_border_touching_hole_solves(self):
        truth = affine_ramp(24)
        mask = hole_mask(24, 0, 6, 0, 6)  # corner hole, exercises reflection
        out = biharmonic_inpaint(truth, mask)
        hole = mask.bits == 0
        assert np.all(np.isfinite(out))
        assert out.min() >= 0.0 and out.max() <= 1.0
        assert np.array_equal(out[~hole], truth[~hole])


class TestLinearity:
    def test_solution_linear_in_image(self):
        """For a fixed mask the fill is linear in the boundary data (away from
        the clip bounds)."""
        rng = named_stream(31, "bih-lin")
        from scipy.ndimage import gaussian_filter

        def smooth(seed_rng):
            f = gaussian_filter(seed_rng.random((24, 24, 3)), sigma=3, axes=(0, 1))
            return (0.4 + 0.2 * (f - f.min()) / (f.max() - f.min())).astype(np.float64)

        a = smooth(rng)
        b = smooth(rng)
        mask = hole_mask(24, 8, 16, 9, 17)
        combo = 0.3 * a + 0.7 * b
        lhs = biharmonic_inpaint(combo, mask)
        rhs = 0.3 * biharmonic_inpaint(a, mask) + 0.7 * biharmonic_inpaint(b, mask)
        for arr in (lhs, rhs):
            assert 0.01 < arr.min() and arr.max() < 0.99  # clip not engaged
        assert np.abs(lhs - rhs).max() <= 1e-6

    def test_channel_permutation_commutes(self, rng):
        x = random_image(rng, 20).astype(np.float64)
        mask = hole_mask(20, 6, 13, 5, 14)
        perm = [2, 0, 1]
        direct = biharmonic_inpaint(x[:, :, perm], mask)
        swapped = biharmonic_inpaint(x, mask)[:, :, perm]
        assert np.abs(direct - swapped).max() <= 1e-12


class TestFallbackAndErrors:
    def test_harmonic_fallback_obeys_max_principle(self, monkeypatch, caplog):
        """When the 13-point solve reports failure the 5-point system takes
        over; its solution cannot exceed the surrounding data range."""
        real_solve = baseline._solve
        calls = {"n": 0}

        def flaky(mat, b):
            calls["n"] += 1
            if calls["n"] == 1:
                return None
            return real_solve(mat, b)

        monkeypatch.setattr(baseline, "_solve", flaky)
        truth = random_image(named_stream(32, "bih-fb"), 20).astype(np.float64)
        mask = hole_mask(20, 7, 13, 7, 13)
        with caplog.at_level(logging.WARNING, logger="wgain.baseline"):
            out = biharmonic_inpaint(truth, mask)
        assert calls["n"] == 2
        assert any("harmonic" in rec.message for rec in caplog.records)
        hole = mask.bits == 0
        ring = ~hole
        for ch in range(3):
            vals = out[:, :, ch][hole]
            assert vals.min() >= truth[:, :, ch][ring].min() - 1e-9
            assert vals.max() <= truth[:, :, ch][ring].max() + 1e-9

    def test_all_missing_rejected(self, rng):
        x = random_image(rng, 16)
        with pytest.raises(ValidationError):
            biharmonic_inpaint(x, Mask(np.zeros((16, 16), dtype=np.uint8)))

    def test_degenerate_size_rejected(self):
        x = np.zeros((1, 8, 3), dtype=np.float32)
        m = Mask(np.ones((1, 8), dtype=np.uint8))
        with pytest.raises(ValidationError):
            biharmonic_inpaint(x, m)


class TestLargeSystems:
    def test_iterative_path_reconstructs_affine(self):
        """Above the direct-solve limit the conjugate gradient branch runs;
        an interior affine region still comes back accurately."""
        side = 128
        truth = affine_ramp(side, a=0.05, bi=0.002, bj=0.003)
        rng = named_stream(33, "bih-cg")
        bits = np.ones((side, side), dtype=np.uint8)
        interior = (rng.random((side - 8, side - 8)) < 0.8).astype(np.uint8)
        bits[4:-4, 4:-4] = 1 - interior
        mask = Mask(bits)
        n_missing = int((bits == 0).sum())
        assert n_missing > baseline.DIRECT_SOLVE_LIMIT  # really the CG branch
        out = biharmonic_inpaint(truth, mask)
        assert np.abs(out[bits == 0] - truth[bits == 0]).max() <= 1e-4
        assert np.array_equal(out[bits == 1], truth[bits == 1])
