from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from lpflow.counterexample import CounterexampleSpec, build_alpha, build_bump
from lpflow.filter_bank import (
    chi,
    chi_integral,
    decompose,
    default_jmax,
    filter_bank,
    homogeneous_jmin,
    kernel_value,
    psi,
)
from lpflow.spectral_core import RealField, SpectralField, forward, grid_for_spacing, make_grid


class TestProfile:
    def test_plateau_and_support(self):
        assert psi(0.5) == 1.0
        assert psi(0.75) == 1.0
        assert psi(1.0) == 0.0
        assert psi(1.2) == 0.0

    def test_midpoint_is_half(self):
        assert psi(0.875) == pytest.approx(0.5, abs=1e-15)

    def test_monotone_and_bounded(self):
        r = np.linspace(0, 1.2, 20001)
        v = psi(r)
        assert np.all(np.diff(v) <= 0)
        assert v.min() >= 0 and v.max() <= 1

    def test_matches_independent_definition(self):
        r = np.linspace(0, 1.1, 4001)
        assert np.abs(psi(r) - oracles.smoothstep_profile(r)).max() <= 1e-15

    def test_chi_radial(self):
        a = chi(np.array([0.3, 0.8]))
        b = chi(np.array([0.8, -0.3]))
        assert a == b

    def test_integral_against_oracle(self):
        # oracle: composite Gauss-Legendre, independent of the adaptive rule
        assert chi_integral() == pytest.approx(oracles.chi_integral(), rel=1e-12)
        assert chi_integral() == pytest.approx(2.410567351787034, rel=1e-12)

    def test_kernel_at_origin(self):
        assert kernel_value(0.0)[0] == pytest.approx(chi_integral() / (4 * math.pi**2), rel=1e-12)

    def test_kernel_against_hankel_oracle(self):
        rho = np.array([0.5, 3.0, 11.0, 40.0])
        assert np.allclose(kernel_value(rho), oracles.kernel_radial(rho), rtol=0, atol=1e-12)


class TestBank:
    """Shell symbols on the simulation grid."""

    def test_default_range(self, grid):
        assert default_jmax(grid) == 6
        assert homogeneous_jmin(grid) == -4

    def test_partition_of_unity(self, grid):
        assert filter_bank(grid).partition_defect() <= 1e-14

    def test_shells_nonnegative(self, grid):
        b = filter_bank(grid)
        for j in range(0, 7):
            assert b.h(j).min() >= 0

    def test_telescoping(self, grid):
        b = filter_bank(grid)
        total = b.chi().copy()
        for j in range(0, 4):
            total += b.h(j)
        assert np.abs(total - b.chi_dilated(4)).max() <= 1e-15

    def test_block_below_minus_one_is_zero(self, grid, u0):
        blk = filter_bank(grid).block(u0, -2)
        assert not blk.coeffs.any()

    def test_constant_low_block(self, small_grid):
        f = forward(RealField(small_grid, 2.0 * np.ones((64, 64))))
        b = filter_bank(small_grid, 3)
        assert np.allclose(b.block(f, -1).coeffs, f.coeffs)

    def test_j_max_beyond_band(self, small_grid):
        with pytest.raises(ValueError, match="band"):
            filter_bank(small_grid, 10)

    def test_homogeneous_below_resolution(self, grid):
        with pytest.raises(ValueError):
            filter_bank(grid).multiplier(-6, homogeneous=True)


class TestShellPurity:
    """Each counterexample bump sits inside the plateau of exactly one shell."""

    @pytest.mark.parametrize("j", [2, 3, 4, 5])
    def test_single_shell(self, grid, j):
        spec = CounterexampleSpec.grid_adapted()
        a = SpectralField(grid, build_bump(j, spec, grid).to_dense())
        b = filter_bank(grid)
        assert np.array_equal(b.block(a, j).coeffs, a.coeffs)
        for jp in b.j_range():
            if jp != j:
                assert not b.block(a, jp).coeffs.any(), jp


class TestPartialSums:
    def test_band_limited_identity(self, small_grid, rng):
        f = forward(RealField(small_grid, rng.standard_normal((64, 64))))
        f.coeffs[:, small_grid.xi_abs > 10] = 0
        b = filter_bank(small_grid, 4)
        assert np.abs(b.partial_sum(f, 4).coeffs - f.coeffs).max() <= 1e-12 * np.abs(f.coeffs).max()

    def test_minus_one_is_low_block(self, small_grid, rng):
        f = forward(RealField(small_grid, rng.standard_normal((64, 64))))
        b = filter_bank(small_grid, 4)
        assert np.array_equal(b.partial_sum(f, -1).coeffs, b.block(f, -1).coeffs)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_far_bump_removed(self, grid, k):
        spec = CounterexampleSpec.grid_adapted()
        a = SpectralField(grid, build_bump(k + 3, spec, grid).to_dense())
        assert not filter_bank(grid).partial_sum(a, k).coeffs.any()


class TestDecompose:
    def test_band_limited_noise(self, small_grid, rng):
        f = forward(RealField(small_grid, rng.standard_normal((64, 64))))
        f.coeffs[:, small_grid.xi_abs > 0.75 * 2**5] = 0
        dec = decompose(f, j_max=4)
        linf = np.abs(np.fft.ifft2(f.coeffs)).max() * 64 * 64 / small_grid.L**2
        assert dec.residual_linf() <= 1e-10 * linf

    def test_alpha_with_extra_shell(self, grid):
        spec = CounterexampleSpec.grid_adapted()
        alpha = SpectralField(grid, build_alpha(spec, grid).to_dense())
        dec = decompose(alpha, j_max=spec.k_max + 1)
        assert np.abs(dec.residual.coeffs).max() <= 1e-10 * np.abs(alpha.coeffs).max()

    def test_zero(self, small_grid):
        dec = decompose(SpectralField(small_grid, np.zeros((1, 64, 64))), j_max=3)
        assert all(not b.coeffs.any() for b in dec.blocks.values())


def test_kernel_is_inverse_transform_of_chi():
    # 16 lattice points per unit radius; at dxi = 1/8 the lattice sum of chi is off by 1.3e-3
    g = grid_for_spacing(512, 1 / 16)
    phi = filter_bank(g, 3).kernel(-1)
    # sampled kernel at x = 0 is L^-2 sum chi = periodized Phi(0)
    assert phi[256, 256].real == pytest.approx(psi(g.xi_abs).sum() / g.L**2, rel=1e-12)
    assert phi[256, 256].real == pytest.approx(kernel_value(0.0)[0], rel=1e-3)


def test_grid_helper():
    assert make_grid(256, 16 * math.pi).dxi == pytest.approx(0.125)
