import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoim.benchmarks import load_family
from hoim.cnf import CnfFormula
from hoim.dynamics import (OscillatorParams, hopf_rhs, make_rhs, normalize_amplitude, schedule_q, shil_term,
                           system_rhs)
from hoim.energy import build_energy
from hoim.integrator import (DIVERGED, OK, DivergenceError, IntegratorConfig, StepLimitError, integrate,
                             integrate_batch)
from hoim.quadratize import quadratize_3sat

UNCOUPLED = OscillatorParams(coupling=0.0, q_max=0.0)


def hopf_radius(r0, t, lam=1.0, rho=1.0):
    """Closed-form radius of dz/dt = lam z - rho z |z|^2."""
    a = lam / rho
    return np.sqrt(a / (1 + (a / r0 ** 2 - 1) * np.exp(-2 * lam * t)))


def flipped(formula):
    return CnfFormula.from_lists(formula.num_vars, [[-v for v in c.ints()] for c in formula.clauses])


class TestVectorField:
    def test_hopf_examples(self):
        p = OscillatorParams()
        assert hopf_rhs(0j, p) == 0
        assert hopf_rhs(1 + 0j, p) == 0
        assert hopf_rhs(0.5 + 0j, p) == pytest.approx(0.375)
        assert hopf_rhs(1j, p.replace(omega=2.0)) == pytest.approx(-2)

    def test_rho_sign_is_saturating(self):
        z = np.array([2.0 + 0j])
        assert hopf_rhs(z, OscillatorParams(rho=-1.0)) == hopf_rhs(z, OscillatorParams(rho=1.0))

    def test_shil(self):
        assert shil_term(1 + 2j) == 1 - 2j
        np.testing.assert_array_equal(shil_term(np.array([1.0, -1.0])), [1.0, -1.0])

    def test_schedule(self):
        p = OscillatorParams(q_max=2.0, t_end=4.0)
        assert schedule_q(0.0, p) == 0
        assert schedule_q(2.0, p) == 1.0
        assert schedule_q(4.0, p) == 2.0
        assert schedule_q(100.0, p) == 2.0
        np.testing.assert_allclose(schedule_q(np.array([1.0, 8.0]), p), [0.5, 2.0])
        with pytest.raises(ValueError):
            schedule_q(-1.0, p)

    def test_normalize(self):
        out = normalize_amplitude(np.array([3 + 4j, 0, 1e-13]))
        np.testing.assert_allclose(out, [0.6 + 0.8j, 0, 0])

    @pytest.mark.parametrize("kw", [dict(lam=0), dict(rho=0), dict(q_max=-1), dict(t_end=0), dict(exponent=3)])
    def test_invalid_params(self, kw):
        with pytest.raises(ValueError):
            OscillatorParams(**kw)

    def test_unit_clause_pushes_towards_true(self):
        e = build_energy(CnfFormula.from_lists(1, [[1]]))
        p = OscillatorParams(coupling=3.0, q_max=0.0)
        # at z = 0 only the coupling acts: -r dE/ds = +r/2 for a positive literal
        assert system_rhs(0.0, np.zeros(1, complex), e, p)[0] == pytest.approx(1.5)
        e_neg = build_energy(CnfFormula.from_lists(1, [[-1]]))
        assert system_rhs(0.0, np.zeros(1, complex), e_neg, p)[0] == pytest.approx(-1.5)

    def test_real_axis_is_invariant(self):
        f = load_family("uf20-91", 1)[0][1]
        e = build_energy(f)
        z = np.random.default_rng(0).uniform(-1, 1, 20).astype(complex)
        for normalize in (True, False):
            out = system_rhs(3.0, z, e, OscillatorParams(normalize=normalize))
            assert np.all(out.imag == 0)

    @given(st.integers(0, 2 ** 31), st.booleans())
    @settings(max_examples=30, deadline=None)
    def test_sign_flip_symmetry(self, seed, normalize):
        rng = np.random.default_rng(seed)
        f = CnfFormula.from_lists(6, [[int(v) * int(rng.choice([-1, 1])) for v in rng.choice(6, 3, replace=False) + 1]
                                      for _ in range(10)])
        p = OscillatorParams(normalize=normalize, q_max=1.5, t_end=2.0)
        z = rng.normal(size=6) + 1j * rng.normal(size=6)
        a = system_rhs(1.0, z, build_energy(f), p)
        b = system_rhs(1.0, -z, build_energy(flipped(f)), p)
        np.testing.assert_allclose(b, -a, atol=1e-12)

    def test_batched_times(self):
        e = build_energy(load_family("uf20-91", 1)[0][1])
        p = OscillatorParams(t_end=5.0)
        rng = np.random.default_rng(2)
        z = rng.normal(size=(3, 20)) + 1j * rng.normal(size=(3, 20))
        t = np.array([0.0, 1.0, 9.0])
        out = system_rhs(t, z, e, p)
        for i in range(3):
            np.testing.assert_allclose(out[i], system_rhs(t[i], z[i], e, p), atol=1e-14)

    def test_quadratic_provider(self):
        f = load_family("uf20-91", 1)[0][1]
        m = quadratize_3sat(f)
        out = system_rhs(0.0, np.zeros(m.num_spins, complex), m, OscillatorParams())
        np.testing.assert_allclose(out, -m.h)

    def test_dimension_mismatch(self):
        e = build_energy(CnfFormula.from_lists(3, [[1, 2, 3]]))
        with pytest.raises(ValueError):
            system_rhs(0.0, np.zeros(4, complex), e, OscillatorParams())


class TestIntegrator:
    def test_hopf_limit_cycle(self):
        e = build_energy(CnfFormula.from_lists(1, [[1]]))
        res = integrate(make_rhs(e, UNCOUPLED), np.array([0.1 + 0j]), (0.0, 20.0))
        assert abs(abs(res.state.z[0]) - 1) < 1e-6
        assert res.state.t == 20.0

    @pytest.mark.parametrize("method", ["rk45", "rk4"])
    def test_hopf_transient_closed_form(self, method):
        e = build_energy(CnfFormula.from_lists(1, [[1]]))
        cfg = IntegratorConfig(method=method, abs_tol=1e-10, rel_tol=1e-10, fixed_step=1e-3)
        for t in (0.5, 2.0, 4.0):
            res = integrate(make_rhs(e, UNCOUPLED), np.array([0.1 + 0.05j]), (0.0, t), cfg)
            assert abs(res.state.z[0]) == pytest.approx(hopf_radius(abs(0.1 + 0.05j), t), abs=1e-8)
            # without rotation the phase is conserved
            assert np.angle(res.state.z[0]) == pytest.approx(np.angle(0.1 + 0.05j), abs=1e-10)

    def test_exponential_decay(self):
        res = integrate(lambda t, z: -z, np.array([1.0 + 0j]), (0.0, 1.0))
        assert res.state.z[0].real == pytest.approx(np.exp(-1), abs=1e-6)
        tight = integrate(lambda t, z: -z, np.array([1.0 + 0j]), (0.0, 1.0),
                          IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12))
        assert tight.state.z[0].real == pytest.approx(np.exp(-1), abs=1e-11)

    def test_rotation(self):
        res = integrate(lambda t, z: 1j * z, np.array([1.0 + 0j]), (0.0, np.pi),
                        IntegratorConfig(abs_tol=1e-10, rel_tol=1e-10))
        assert res.state.z[0] == pytest.approx(-1, abs=1e-8)

    def test_time_dependent(self):
        res = integrate(lambda t, z: np.full_like(z, 2 * t), np.zeros(1, complex), (0.0, 3.0))
        assert res.state.z[0].real == pytest.approx(9.0, abs=1e-9)

    def test_rk4_deterministic(self):
        e = build_energy(load_family("uf20-91", 1)[0][1])
        rhs = make_rhs(e, OscillatorParams(t_end=2.0))
        z0 = np.random.default_rng(5).normal(size=(4, 20)) * 0.1 + 0j
        cfg = IntegratorConfig(method="rk4", fixed_step=0.01)
        a = integrate_batch(rhs, z0, (0.0, 2.0), cfg)
        b = integrate_batch(rhs, z0, (0.0, 2.0), cfg)
        np.testing.assert_array_equal(a.z, b.z)
        assert list(a.steps) == [200] * 4

    def test_rk45_matches_rk4(self):
        e = build_energy(load_family("uf20-91", 1)[0][1])
        rhs = make_rhs(e, OscillatorParams(t_end=2.0, normalize=False))
        z0 = np.random.default_rng(6).normal(size=(2, 20)) * 0.1 + 0j
        tol = 1e-8
        a = integrate_batch(rhs, z0, (0.0, 2.0), IntegratorConfig(abs_tol=tol, rel_tol=tol))
        b = integrate_batch(rhs, z0, (0.0, 2.0), IntegratorConfig(method="rk4", fixed_step=2e-3))
        assert np.max(np.abs(a.z - b.z)) < 10 * tol * (1 + np.max(np.abs(b.z)))

    def test_rows_independent_of_batch(self):
        e = build_energy(load_family("uf20-91", 1)[0][1])
        rhs = make_rhs(e, OscillatorParams(t_end=3.0))
        z0 = np.random.default_rng(7).normal(size=(5, 20)) * 0.1 + 0j
        full = integrate_batch(rhs, z0, (0.0, 3.0))
        for i in (0, 3):
            alone = integrate_batch(rhs, z0[i:i + 1], (0.0, 3.0))
            np.testing.assert_array_equal(alone.z[0], full.z[i])
            assert alone.steps[0] == full.steps[i]

    def test_observer_sees_initial_and_final(self):
        seen = []
        integrate(lambda t, z: -z, np.array([1.0 + 0j]), (0.0, 1.0), observer=lambda t, z: seen.append((t, z[0])))
        assert seen[0] == (0.0, 1.0)
        assert seen[-1][0] == 1.0
        assert all(a[0] < b[0] for a, b in zip(seen, seen[1:]))

    def test_divergence(self):
        with pytest.raises(DivergenceError):
            integrate(lambda t, z: z * z, np.array([1.0 + 0j]), (0.0, 2.0))

    def test_divergence_isolated_in_batch(self):
        res = integrate_batch(lambda t, z: z * z, np.array([[1.0 + 0j], [-1.0 + 0j]]), (0.0, 2.0))
        assert list(res.status) == [DIVERGED, OK]
        assert res.z[1, 0].real == pytest.approx(-1 / 3, abs=1e-5)

    def test_rk4_divergence(self):
        res = integrate_batch(lambda t, z: z * z, np.array([[1.0 + 0j]]), (0.0, 2.0),
                              IntegratorConfig(method="rk4", fixed_step=0.05))
        assert res.status[0] == DIVERGED

    def test_step_limit(self):
        with pytest.raises(StepLimitError):
            integrate(lambda t, z: -z, np.array([1.0 + 0j]), (0.0, 100.0), IntegratorConfig(max_steps=5))

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            integrate(lambda t, z: z, np.ones(1, complex), (1.0, 0.0))
        with pytest.raises(ValueError):
            integrate(lambda t, z: z, np.array([np.nan + 0j]), (0.0, 1.0))
        with pytest.raises(ValueError):
            IntegratorConfig(method="euler")
        with pytest.raises(ValueError):
            IntegratorConfig(abs_tol=0)


class TestBehaviour:
    def test_injection_locking_binarises_phase(self):
        # uncoupled oscillators under injection settle on the real axis, keeping the sign of Re z
        e = build_energy(CnfFormula.from_lists(4, [[1, 2, 3, 4]]))
        p = OscillatorParams(coupling=0.0, q_max=1.0, t_end=1.0)
        z0 = np.exp(1j * np.array([0.3, 1.2, 2.0, -2.9]))
        res = integrate(make_rhs(e, p), z0, (0.0, 30.0))
        np.testing.assert_allclose(res.state.z.imag, 0, atol=1e-5)
        np.testing.assert_array_equal(np.sign(res.state.z.real), np.sign(z0.real))
        # locked amplitude sqrt(lam + q_max)
        np.testing.assert_allclose(np.abs(res.state.z), np.sqrt(2.0), atol=1e-5)

    def test_coupling_lowers_energy_on_average(self):
        f = load_family("uf20-91", 1)[0][1]
        e = build_energy(f)
        rng = np.random.default_rng(8)
        z0 = 0.1 * (rng.normal(size=(64, 20)) + 1j * rng.normal(size=(64, 20)))
        res = integrate_batch(make_rhs(e, OscillatorParams(t_end=10.0)), z0, (0.0, 10.0))
        start = e.evaluate(np.where(z0.real >= 0, 1.0, -1.0))
        end = e.evaluate(np.where(res.z.real >= 0, 1.0, -1.0))
        assert end.mean() < 0.25 * start.mean()
