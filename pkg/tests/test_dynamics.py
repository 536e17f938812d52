from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from lpflow.counterexample import CounterexampleSpec, build_u0
from lpflow.dynamics import (
    SimulationConfig,
    StabilityError,
    TraceRecord,
    WeakSequenceSpec,
    continuity_probe,
    default_T1,
    discontinuity_evidence,
    energy_drift_run,
    integrate,
    mollify,
    perturbed_taylor_green,
    refinement_jumps,
    rhs,
    rk4_order,
    simulate,
    step,
    weak_functional,
)
from lpflow.filter_bank import filter_bank
from lpflow.norms import tl_norm
from lpflow.paradifferential import divergence_defect, leray
from lpflow.spectral_core import RealField, SpectralField, energy, forward, make_grid


def _tiny_spec():
    return CounterexampleSpec.grid_adapted(k_max=3)


def _tiny_grid():
    # dxi = 1/8 as in production, Nyquist 16: room for xi^3 = 10 and its unit ball
    return make_grid(256, 16 * math.pi)


def _random_divfree(N, rng, radius, complex_=False, L=2 * math.pi):
    g = make_grid(N, L)
    vals = rng.standard_normal((2, N, N))
    if complex_:
        vals = vals + 1j * rng.standard_normal((2, N, N))
    u = forward(RealField(g, vals))
    u.coeffs[:, g.xi_abs > radius] = 0
    return leray(u)


class TestRhs:
    def test_against_pair_sum_oracle(self, rng):
        u = _random_divfree(16, rng, 4, complex_=True)
        ref = oracles.euler_rhs(u.coeffs, 16, u.grid.L)
        ref[:, 8, :] = 0
        ref[:, :, 8] = 0
        got = rhs(u).coeffs
        assert np.abs(got - ref).max() <= 1e-12 * np.abs(ref).max()

    def test_taylor_green_is_steady(self):
        u = perturbed_taylor_green(32, amplitude=0.0)
        assert np.abs(rhs(u).coeffs).max() <= 1e-12

    def test_zero_mean(self, rng):
        u = _random_divfree(32, rng, 10)
        assert np.abs(rhs(u).coeffs[:, 0, 0]).max() <= 1e-12

    def test_divergence_free(self, rng):
        u = _random_divfree(32, rng, 10)
        assert divergence_defect(rhs(u)) <= 1e-14

    def test_rejects_compressible(self, small_grid, rng):
        u = forward(RealField(small_grid, rng.standard_normal((2, 64, 64))))
        with pytest.raises(ValueError):
            rhs(u)

    def test_stability_guard(self):
        u = perturbed_taylor_green(32)
        with pytest.raises(StabilityError):
            step(u, 1.0)


class TestTimeStepping:
    def test_rk4_order(self):
        out = rk4_order(perturbed_taylor_green(32), 2.0, (120, 240, 480, 960))
        for p in out["orders"]:
            assert 4 * 0.7 <= p <= 4 * 1.3

    def test_energy_conserved_real(self):
        assert energy_drift_run(perturbed_taylor_green(32), 2.0, 120) <= 1e-10

    def test_complex_energy_change_is_physical(self, rng):
        # 1/2 int |u|^2 is not invariant for complex data; its change must not depend on dt
        u = _random_divfree(32, rng, 6, complex_=True)
        u = u.with_coeffs(0.3 * u.coeffs / np.abs(u.coeffs).max())
        e0 = energy(u)
        coarse = energy(integrate(u, 0.02, 20)) - e0
        fine = energy(integrate(u, 0.01, 40)) - e0
        assert abs(coarse) > 1e-6 * e0
        assert abs(coarse - fine) <= 1e-6 * abs(coarse)

    def test_mean_preserved(self, rng):
        u = _random_divfree(32, rng, 6)
        u.coeffs[:, 0, 0] = [0.3 * u.grid.L**2, -0.1 * u.grid.L**2]
        v = integrate(u, 0.01, 10)
        assert np.abs(v.coeffs[:, 0, 0] - u.coeffs[:, 0, 0]).max() <= 1e-12 * u.grid.L**2

    def test_duhamel_first_order(self):
        u = perturbed_taylor_green(32)
        F = rhs(u).coeffs
        errs = []
        for dt in (0.01, 0.005):
            v = step(u, dt).coeffs
            errs.append(np.abs(v - u.coeffs - dt * F).max())
        # remainder is O(dt^2)
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_one_sided_path_matches_general(self, rng):
        g = make_grid(32, 2 * math.pi)
        c = np.zeros((2, 32, 32), complex)
        c[:, 1:6, :] = rng.standard_normal((2, 5, 32)) + 1j * rng.standard_normal((2, 5, 32))
        c[:, :, 6:-5] = 0
        u = leray(SpectralField(g, c))
        fast = step(u, 0.001).coeffs
        ref = u.coeffs.copy()
        k = [oracles.euler_rhs(ref, 32, g.L)]
        k.append(oracles.euler_rhs(ref + 0.0005 * k[0], 32, g.L))
        k.append(oracles.euler_rhs(ref + 0.0005 * k[1], 32, g.L))
        k.append(oracles.euler_rhs(ref + 0.001 * k[2], 32, g.L))
        ref = ref + 0.001 / 6 * (k[0] + 2 * k[1] + 2 * k[2] + k[3])
        assert np.abs(fast - ref).max() <= 1e-11 * np.abs(ref).max()


class TestConfig:
    def test_defaults(self):
        cfg = SimulationConfig(grid=_tiny_grid(), T1=0.1)
        assert cfg.stop_step == cfg.steps
        assert cfg.dt == pytest.approx(0.1 / 256)

    def test_backward(self):
        assert SimulationConfig(grid=_tiny_grid(), T1=0.1, backward=True).dt < 0

    @pytest.mark.parametrize("kw", [{"T1": -1.0}, {"T1": float("nan")}, {"T1": 1.0, "steps": 0}, {"T1": 1.0, "cadence": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SimulationConfig(grid=_tiny_grid(), **kw)

    def test_norm_steps_dyadic(self):
        cfg = SimulationConfig(grid=_tiny_grid(), T1=0.1, steps=64, norm_cadence=1000)
        assert cfg.norm_steps() == [0, 1, 2, 4, 8, 16, 32, 64]

    def test_default_T1(self, u0):
        T1 = default_T1(u0)
        assert 0.2 < T1 < 0.4
        assert float(f"{T1:.3g}") == T1


class TestWeakFunctional:
    def test_one_hot_is_block_norm(self, u0):
        N = weak_functional(u0, WeakSequenceSpec.one_hot(4), 3.0)
        assert N == pytest.approx(2.0**12 * tl_norm(filter_bank(u0.grid).block(u0, 4), 0.0), rel=1e-12)

    def test_nonfinite_weights(self):
        with pytest.raises(ValueError):
            WeakSequenceSpec({1: float("inf")})

    def test_mollify_identity_at_zero(self, small_grid, rng):
        u = _random_divfree(64, rng, 20)
        assert np.allclose(mollify(u, 0.0, filter_bank(u.grid, 4)).coeffs, u.coeffs, atol=1e-12)


@pytest.fixture(scope="module")
def tiny_run():
    spec = _tiny_spec()
    g = _tiny_grid()
    u0 = build_u0(spec, g)
    cfg = SimulationConfig(grid=g, T1=0.2, steps=16, s=3.0, tracked_k=(3,), norm_cadence=4)
    return spec, u0, simulate(cfg, u0, spec)


class TestSimulate:
    def test_trace_shape(self, tiny_run):
        _, _, res = tiny_run
        tr = res.trace
        assert tr.steps == list(range(17))
        assert np.all(np.diff(tr.times) > 0)
        assert [r["step"] for r in tr.norms] == [0, 1, 2, 4, 8, 12, 16]

    def test_initial_coefficient(self, tiny_run):
        spec, u0, res = tiny_run
        m = res.trace.tracked[3]["m"]
        assert np.allclose(res.trace.coefficient(3)[0], u0.coeffs[:, m[0], m[1]])

    def test_hygiene(self, tiny_run):
        tr = tiny_run[2].trace
        assert max(r["divergence_ratio"] for r in tr.norms) <= 1e-10
        assert max(tr.mean) <= 1e-12

    def test_json_roundtrip(self, tiny_run, tmp_path):
        tr = tiny_run[2].trace
        tr.write(tmp_path)
        back = TraceRecord.load(tmp_path)
        assert back.to_json() == tr.to_json()

    def test_csv_columns(self, tiny_run):
        head = tiny_run[2].trace.to_csv().splitlines()[0].split(",")
        assert head[0] == "t" and head[1:4] == ["u1_re_k3", "u1_im_k3", "u1_abs_k3"]
        assert head[-3:] == ["N", "energy", "divergence"]

    def test_zero_horizon(self, tiny_run):
        spec, u0, _ = tiny_run
        cfg = SimulationConfig(grid=u0.grid, T1=0.0, steps=8, stop_step=0, tracked_k=(3,))
        tr = simulate(cfg, u0, spec).trace
        assert tr.times == [0.0] and len(tr.norms) == 1
        assert tr.norms[0]["dF3"] == 0.0

    def test_grid_mismatch(self, tiny_run):
        spec, u0, _ = tiny_run
        cfg = SimulationConfig(grid=make_grid(128, 16 * math.pi), T1=0.1)
        with pytest.raises(ValueError):
            simulate(cfg, u0, spec)


class TestAnalysis:
    def test_continuity_probe(self, tiny_run):
        out = continuity_probe(tiny_run[2].trace, 3.0, 0.5)
        assert out["lipschitz_slope"] > 0
        assert out["lipschitz_residual"] < 0.2
        assert out["dyadic_monotone"]

    def test_refinement(self, tiny_run):
        out = refinement_jumps(tiny_run[2].trace)
        assert out["fine"] < out["coarse"]

    def test_discontinuity_needs_three(self, tiny_run):
        with pytest.raises(ValueError):
            discontinuity_evidence({3: tiny_run[2].trace}, 3.0, 4)

    def test_eps_positive(self, tiny_run):
        with pytest.raises(ValueError):
            continuity_probe(tiny_run[2].trace, 3.0, 0.0)
