from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from lpflow.counterexample import (
    CounterexampleSpec,
    MomentError,
    ResolutionError,
    SparseSpectrum,
    Variant,
    alpha_hat,
    build_alpha,
    build_bump,
    build_low_bump,
    c0,
    interaction_table,
    low_bump_mass,
    mechanism_constants,
    periodization_study,
    u0_hat,
    xi_point,
)
from lpflow.filter_bank import chi_integral
from lpflow.paradifferential import divergence_defect
from lpflow.spectral_core import grid_for_spacing, make_grid

# limit of 2^{(s-1)k} F[P(u0.grad u0)](xi^k) for the GRID-ADAPTED data at s = 3,
# Richardson-extrapolated from the brute-force convolution oracle at k = 3..6
C1_GRID_ADAPTED = np.array([0.03000392j, -0.05196832j])


class TestSpec:
    def test_defaults(self):
        sp = CounterexampleSpec()
        assert sp.variant is Variant.FAITHFUL
        assert (sp.k_max, sp.delta, sp.rho) == (12, 1 / 16, 1 / 32)

    def test_grid_adapted_defaults(self):
        sp = CounterexampleSpec.grid_adapted()
        assert (sp.k_max, sp.delta, sp.rho) == (5, 0.25, 0.5)

    def test_small_s(self):
        with pytest.raises(ValueError):
            CounterexampleSpec(s=2.5)

    def test_zero_delta(self):
        with pytest.raises(MomentError):
            CounterexampleSpec(delta=0.0)

    def test_faithful_low_ball(self):
        with pytest.raises(ValueError):
            CounterexampleSpec.faithful(delta=0.25, rho=0.5)

    def test_variant_string(self):
        assert CounterexampleSpec(variant="GRID-ADAPTED").variant is Variant.GRID_ADAPTED

    def test_points(self):
        sp = CounterexampleSpec()
        assert np.allclose(xi_point(3, sp), [5 * math.sqrt(3), 5])
        assert np.allclose(xi_point(-1, sp), [5 * math.sqrt(3) / 16, 5 / 16])


class TestClosedForm:
    def test_c0_matches_u0_hat(self, ga_spec):
        for k in range(1, ga_spec.k_max + 1):
            val = 2.0 ** (k * ga_spec.s) * u0_hat(xi_point(k, ga_spec), ga_spec)
            assert np.allclose(val, c0(ga_spec), atol=1e-15)

    def test_c0_value(self):
        assert np.allclose(c0(CounterexampleSpec()), 1.25j * np.array([-0.5, math.sqrt(3) / 2]))

    def test_alpha_is_oracle(self, ga_spec, rng):
        pts = rng.uniform(-45, 45, (4000, 2))
        pts[:50] = xi_point(3, ga_spec) + rng.uniform(-1, 1, (50, 2))
        ref, _ = oracles._alpha_hat(pts, 3.0, math.pi / 6, 5, 0.25, 0.5)
        assert np.allclose(alpha_hat(pts, ga_spec), ref, rtol=0, atol=1e-14)

    def test_low_bump_mass(self, ga_spec):
        assert low_bump_mass(ga_spec) == pytest.approx(0.25 * chi_integral(), rel=1e-15)


class TestSparse:
    def test_bump_support_in_ball(self, grid, ga_spec):
        b = build_bump(4, ga_spec, grid)
        d = np.linalg.norm(b.points() - xi_point(4, ga_spec), axis=1)
        assert d.max() < 1
        assert np.all(b.values.real > 0)

    def test_zero_bump(self, grid, ga_spec):
        assert len(build_bump(0, ga_spec, grid)) == 0

    def test_dense_roundtrip(self, grid, ga_spec):
        a = build_alpha(ga_spec, grid)
        d = a.to_dense()
        assert np.count_nonzero(d) == len(a)
        for i in range(0, len(a), max(1, len(a) // 50)):
            assert a.lookup(a.m[i]) == d[a.m[i][0] % grid.N, a.m[i][1] % grid.N]

    def test_json_roundtrip(self, grid, ga_spec, tmp_path):
        a = build_alpha(ga_spec, grid)
        back = SparseSpectrum.from_json(a.save(tmp_path / "a.json").read_text(), grid)
        assert np.array_equal(back.m, a.m) and np.array_equal(back.values, a.values)
        assert back.tags == a.tags

    def test_duplicates_rejected(self, grid):
        with pytest.raises(ValueError):
            SparseSpectrum(grid, [[1, 1], [1, 1]], [1.0, 2.0], ["a", "a"])

    def test_sparse_matches_closed_form(self, grid, ga_spec):
        a = build_alpha(ga_spec, grid)
        assert np.allclose(a.values.real, alpha_hat(a.points(), ga_spec), rtol=0, atol=1e-15)

    def test_low_bump_resolution(self, ga_spec):
        with pytest.raises(ResolutionError):
            build_low_bump(ga_spec, grid_for_spacing(2048, 0.25))

    def test_faithful_unresolved_allowed(self, grid):
        low = build_low_bump(CounterexampleSpec.faithful(), grid)
        assert len(low) <= 1

    def test_nyquist_overflow(self, ga_spec):
        with pytest.raises(ValueError, match="Nyquist"):
            build_bump(5, ga_spec, make_grid(256, 16 * math.pi))


class TestU0:
    def test_divergence_free(self, u0):
        assert divergence_defect(u0) <= 1e-15

    def test_one_sided_in_first_axis(self, u0):
        # the enlarged low ball dips below xi_2 = 0, but every bump has xi_1 > 0
        rows = np.nonzero(np.abs(u0.coeffs).sum(axis=(0, 2)) > 0)[0]
        assert rows.min() > 0 and rows.max() < u0.grid.N // 2

    def test_lattice_values(self, u0, ga_spec, grid):
        a = build_alpha(ga_spec, grid)
        m = a.m[len(a) // 2]
        pt = m * grid.dxi
        assert np.allclose(u0.coeffs[:, m[0], m[1]], u0_hat(pt, ga_spec), atol=1e-15)


class TestInteractions:
    @pytest.mark.parametrize("variant", ["faithful", "grid_adapted"])
    @pytest.mark.parametrize("k", [3, 4, 5])
    def test_three_pairs(self, variant, k):
        sp = getattr(CounterexampleSpec, variant)()
        t = interaction_table(k, sp)
        assert sorted(t.pairs) == sorted([("low", f"a{k}"), (f"a{k - 1}", f"a{k - 1}"), (f"a{k}", "low")])

    def test_serialisable(self):
        d = interaction_table(3, CounterexampleSpec()).to_dict()
        assert d["k"] == 3 and len(d["pairs"]) == 3


class TestMechanism:
    def test_routes_match_oracle(self, ga_spec):
        m = mechanism_constants(ga_spec, ks=(3, 4, 5))
        for k in (3, 4, 5):
            ref = oracles.projected_convective_at(xi_point(k, ga_spec), 3.0, math.pi / 6, 5, 0.25, 0.5)
            got = np.array([complex(a, b) for a, b in m.route1[k]])
            assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)
        assert m.max_disagreement() <= 1e-8

    def test_limit_constant(self, ga_spec):
        m = mechanism_constants(ga_spec, ks=(3, 4, 5))
        c1 = np.array([complex(a, b) for a, b in m.c1])
        assert np.allclose(c1, C1_GRID_ADAPTED, rtol=0, atol=1e-8)
        assert m.c1_ratio_standard == pytest.approx(math.sqrt(3), rel=1e-12)

    def test_correction_halves(self, ga_spec):
        n = mechanism_constants(ga_spec, ks=(3, 4, 5)).c2_norms()
        assert n[4] / n[3] == pytest.approx(0.5, rel=1e-6)
        assert n[5] / n[4] == pytest.approx(0.5, rel=1e-6)

    def test_faithful_alternate_pair_ratio(self):
        m = mechanism_constants(CounterexampleSpec.faithful(), ks=(3, 4))
        assert m.c1_ratio_alternate_pair == pytest.approx(3.0, rel=1e-12)
        assert m.moment == pytest.approx(m.moment_direct, rel=1e-10)

    def test_k_range(self, ga_spec):
        with pytest.raises(ValueError):
            mechanism_constants(ga_spec, ks=(2, 3))


class TestPeriodization:
    def test_small_grids_monotone(self, ga_spec):
        grids = [grid_for_spacing(512, d) for d in (0.25, 0.125, 0.0625)]
        rep = periodization_study(ga_spec, grids, j=2, ks=[2, 3])
        assert all(rep.monotone.values())
        assert max(rep.aligned_residual) <= 1e-12

    def test_needs_three_grids(self, ga_spec):
        with pytest.raises(ValueError):
            periodization_study(ga_spec, [grid_for_spacing(256, 0.25)] * 2)
