from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rabinowitz_lab.fourier_loop import CriticalPointId, action, action_gradient, is_critical
from rabinowitz_lab.vortex_flow import (
    DegenerateAsymptotics,
    NotConverged,
    OrderViolation,
    ReducedState,
    StepSizeUnderflow,
    Trajectory,
    act_on_state,
    act_on_trajectory,
    admissible_intermediate_modes,
    constant_trajectory,
    count_vortices,
    energy,
    explicit_vortex,
    explicit_vortex_trajectory,
    integrate,
    max_deviation_from_explicit,
    shoot,
    vector_field,
    vortex_report,
    window_converged,
)

PI = math.pi


def state(rho: dict, eta: float, band=(-2, 1), phases: dict | None = None) -> ReducedState:
    n = band[1] - band[0] + 1
    r = np.zeros(n)
    p = np.zeros(n)
    for m, v in rho.items():
        r[m - band[0]] = v
    for m, v in (phases or {}).items():
        p[m - band[0]] = v
    return ReducedState(band[0], band[1], r, p, eta)


def rho_of(s: ReducedState, m: int) -> float:
    return float(s.rho[m - s.band_lo])


@pytest.fixture(scope="module")
def shot_10():
    return shoot(1, 0, band=(-2, 1), n_shots=64)


@pytest.fixture(scope="module")
def shot_0m1():
    return shoot(0, -1, n_shots=64)


class TestVectorField:
    def test_critical_point_is_fixed(self):
        d = vector_field(ReducedState.critical(1, (-2, 1)))
        assert d.norm() == 0.0

    def test_midpoint_example(self):
        d = vector_field(state({-1: 0.5, 0: 0.5}, 0.5))
        m = dict(zip(range(-2, 2), d.rho))
        assert m[-1] == pytest.approx(-PI / 2)
        assert m[0] == pytest.approx(PI / 2)
        assert d.eta == pytest.approx(-PI / 2)

    def test_blowup_example(self):
        d = vector_field(state({0: 2.0}, 0.0))
        assert d.rho[2] == 0.0
        assert d.eta == pytest.approx(3 * PI)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_is_negative_gradient(self, seed):
        rng = np.random.default_rng(seed)
        x = ReducedState(-3, 3, rng.uniform(0, 1, 7), rng.uniform(0, 2 * PI, 7), rng.uniform(-3, 3))
        g = action_gradient(x.to_point())
        # radial component of -grad in each mode
        radial = -np.real(np.conj(np.exp(1j * x.phases)) * g.loop)
        d = vector_field(x)
        np.testing.assert_allclose(d.rho, radial, atol=1e-12)
        assert d.eta == pytest.approx(-g.eta, abs=1e-12)
        # no angular component, which is why phases stay frozen
        angular = np.imag(np.conj(np.exp(1j * x.phases)) * g.loop)
        assert np.max(np.abs(angular)) < 1e-12


class TestExplicitVortex:
    def test_residual_against_vector_field(self):
        worst = 0.0
        for s in np.linspace(-10, 10, 2001):
            x = explicit_vortex(s)
            eta = x.eta
            d_eta = -2 * PI * eta * (1 - eta)
            exact = np.array([d_eta, -d_eta, d_eta])
            d = vector_field(x)
            worst = max(worst, float(np.max(np.abs(np.append(d.rho, d.eta) - exact))))
        assert worst < 1e-12

    def test_limits(self):
        assert is_critical(explicit_vortex(-12).to_point(), 1e-9) == CriticalPointId(0, 1)
        assert is_critical(explicit_vortex(12).to_point(), 1e-9) == CriticalPointId(0, 0)

    def test_midpoint(self):
        x = explicit_vortex(0.0)
        assert x.rho.tolist() == [0.5, 0.5] and x.eta == 0.5
        assert action(x.to_point()) == pytest.approx(PI / 2)


class TestIntegrate:
    def test_constant_at_critical_point(self):
        c = ReducedState.critical(2, (-3, 0), r=0.3)
        tr = integrate(c, 0.0, 5.0)
        assert np.all(tr.rho == c.rho) and np.all(tr.eta == c.eta)
        assert tr.neg_limit == tr.pos_limit == CriticalPointId(0.3, 2)

    @pytest.mark.parametrize("half", [1.0, 1.5])
    def test_follows_closed_form(self, half):
        tr = integrate(explicit_vortex(-half), -half, half)
        end = tr.state(len(tr) - 1)
        ref = explicit_vortex(half)
        assert np.max(np.abs(end.vector() - ref.vector())) < 1e-6

    def test_long_window_is_ill_conditioned(self):
        # Rounding at s=-6 sits on a mode growing like exp(4 pi s); over 12 units
        # it swamps the solution, so forward integration cannot track the closed form.
        try:
            tr = integrate(explicit_vortex(-6.0), -6.0, 6.0)
        except StepSizeUnderflow:
            return
        end = tr.state(len(tr) - 1)
        assert np.max(np.abs(end.vector() - explicit_vortex(6.0).vector())) > 1e-3

    def test_blowup(self):
        with pytest.raises(StepSizeUnderflow):
            integrate(state({0: 2.0}, 0.0), 0.0, 10.0)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            integrate(explicit_vortex(0), 1.0, 0.0)
        with pytest.raises(ValueError):
            integrate(explicit_vortex(0), 0.0, 1.0, rtol=0.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_phase_freeze_and_monotone_action(self, seed):
        rng = np.random.default_rng(seed)
        x = ReducedState(-3, 0, rng.uniform(0, 0.4, 4), rng.uniform(0, 2 * PI, 4), rng.uniform(0, 1))
        tr = integrate(x, 0.0, 0.3)
        assert np.array_equal(tr.phases, x.phases)
        for i in range(0, len(tr), max(1, len(tr) // 10)):
            c = tr.state(i).to_point().loop.coeffs
            live = tr.rho[i] > 1e-8
            diff = np.angle(c[live] * np.exp(-1j * x.phases[live]))
            assert np.max(np.abs(diff), initial=0.0) < 1e-12
        a = tr.actions()
        assert np.all(np.diff(a) <= 1e-12)
        assert a[-1] < a[0]

    @pytest.mark.parametrize("r", [0.0, 0.25])
    @pytest.mark.parametrize("k", [-1, 0, 1])
    def test_equivariance(self, r, k):
        x = state({-1: 0.6, 0: 0.3, 1: 0.1}, 0.4, phases={-1: 0.2, 0: 1.0})
        a = integrate(act_on_state((r, k), x), 0.0, 0.5)
        b = act_on_trajectory((r, k), integrate(x, 0.0, 0.5))
        assert a.band == b.band
        np.testing.assert_allclose(a.phases, b.phases, atol=1e-15)
        for s in np.linspace(0, 0.5, 11):
            np.testing.assert_allclose(a.state_at(s).vector(), b.state_at(s).vector(), atol=1e-8)


class TestEnergy:
    def test_constant(self):
        assert energy(constant_trajectory(CriticalPointId(0, 0), (-1, 1))) == 0.0

    def test_explicit(self):
        assert abs(energy(explicit_vortex_trajectory(-10, 10)) - PI) < 1e-6

    def test_explicit_shifted(self):
        tr = act_on_trajectory((0.3, 2), explicit_vortex_trajectory(-10, 10))
        assert tr.neg_limit.k == 3 and tr.pos_limit.k == 2
        assert abs(energy(tr) - PI) < 1e-6

    def test_energy_equals_action_drop_for_closed_form(self):
        tr = explicit_vortex_trajectory(-10, 10)
        drop = action(explicit_vortex(-10).to_point()) - action(explicit_vortex(10).to_point())
        assert abs(energy(tr) - drop) < 1e-6

    def test_unconverged(self):
        tr = integrate(explicit_vortex(-1.0), -1.0, 1.0)
        with pytest.raises(NotConverged):
            energy(tr)


class TestAdmissibleModes:
    def test_examples(self):
        assert admissible_intermediate_modes(1, 0) == set()
        assert admissible_intermediate_modes(2, 0) == {-1}
        assert admissible_intermediate_modes(0, 0) == set()

    def test_order(self):
        with pytest.raises(OrderViolation):
            admissible_intermediate_modes(0, 1)

    @given(st.integers(-20, 20), st.integers(0, 20))
    def test_size_and_range(self, kp, gap):
        km = kp + gap
        modes = admissible_intermediate_modes(km, kp)
        assert len(modes) == max(gap - 1, 0)
        assert all(-km < m < -kp for m in modes)


class TestShoot:
    def test_unique_connection_matches_closed_form(self, shot_10):
        assert len(shot_10) == 1
        tr = shot_10[0]
        assert tr.state_at(0.0).eta == pytest.approx(0.5, abs=1e-12)
        assert max_deviation_from_explicit(tr, np.linspace(-8, 8, 801)) < 1e-6

    def test_limits_and_action(self, shot_10):
        tr = shot_10[0]
        assert tr.neg_converged and tr.pos_converged
        first, last = tr.state(0), tr.state(len(tr) - 1)
        assert first.eta == pytest.approx(1.0, abs=1e-9)
        assert last.eta == pytest.approx(0.0, abs=1e-9)
        assert action(first.to_point()) == pytest.approx(PI * first.eta, abs=1e-9)
        assert action(last.to_point()) == pytest.approx(PI * last.eta, abs=1e-9)
        assert tr.neg_limit.k >= tr.pos_limit.k + 1

    def test_energy_identity(self, shot_10):
        tr = shot_10[0]
        drop = PI * (tr.neg_limit.k - tr.pos_limit.k)
        assert abs(energy(tr) - drop) < 1e-6

    def test_window_convergence(self, shot_10):
        assert window_converged(shot_10[0]) == (True, True)

    def test_monotone_eta_and_action(self, shot_10):
        tr = shot_10[0]
        assert np.all(np.diff(tr.eta) <= 0)
        assert np.all(np.diff(tr.actions()) <= 1e-12)

    def test_equivariant_shift(self, shot_10, shot_0m1):
        assert len(shot_0m1) == 1
        moved = act_on_trajectory((0.0, -1), shot_10[0])
        other = shot_0m1[0]
        for s in np.linspace(-5, 5, 41):
            a = moved.state_at(s).widen(-2, 2)
            b = other.state_at(s).widen(-2, 2)
            assert np.max(np.abs(a.vector() - b.vector())) < 1e-6

    def test_extra_modes_die(self):
        tr = shoot(1, 0, band=(-2, 1), extra_seed=1e-3)
        assert len(tr) == 1
        end = tr[0].state(len(tr[0]) - 1)
        assert rho_of(end, -2) < 1e-8 and rho_of(end, 1) < 1e-8

    def test_band_must_contain_endpoints(self):
        with pytest.raises(ValueError):
            shoot(1, 0, band=(0, 1))


class TestCount:
    @pytest.mark.parametrize("km,kp", [(1, 0), (0, -1), (5, 4)])
    def test_count_is_one(self, km, kp):
        assert count_vortices(km, kp) == 1

    def test_degenerate(self):
        with pytest.raises(DegenerateAsymptotics):
            count_vortices(0, 0)
        with pytest.raises(OrderViolation):
            count_vortices(0, 1)

    def test_report_shape(self):
        rep = vortex_report(1, 0)
        assert set(rep) == {"k_minus", "k_plus", "count_mod2", "orbits"}
        assert rep["count_mod2"] == 1 and len(rep["orbits"]) == 1
        assert abs(rep["orbits"][0]["energy"] - PI) < 1e-6


class TestTrajectory:
    def test_csv_header_and_precision(self):
        tr = explicit_vortex_trajectory(-1, 1, 5)
        lines = tr.to_csv().splitlines()
        assert lines[0] == "s,eta,rho_-1,rho_0"
        assert len(lines) == 6
        assert float(lines[3].split(",")[1]) == 0.5

    def test_strictly_increasing(self):
        with pytest.raises(ValueError):
            Trajectory(0, 0, np.zeros(1), [0.0, 0.0], [[1.0], [1.0]], [0.0, 0.0])

    def test_negative_amplitude_rejected(self):
        with pytest.raises(ValueError):
            ReducedState(0, 0, np.array([-0.1]), np.zeros(1), 0.0)

    def test_state_roundtrip(self):
        x = state({-1: 0.3, 1: 0.2}, 0.7, phases={-1: 1.0, 1: -2.0})
        y = ReducedState.from_point(x.to_point())
        np.testing.assert_allclose(y.rho, x.rho)
        assert y.eta == x.eta
