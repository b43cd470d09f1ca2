"""Vortex flow lines of the Rabinowitz action on loops in the complex plane.

Writing ``u(s, t) = sum_m a_m(s) exp(2 pi i m t)``, the vortex equations
decouple into one linear ODE per mode, coupled only through the multiplier::

    d/ds a_m  = 2 pi (m + eta) a_m
    d/ds eta  = pi (sum_m |a_m|^2 - 1)

Each ``a_m`` keeps its argument along the flow, so the state reduces to the
amplitudes ``rho_m = |a_m|`` plus ``eta``, with the phases carried along as
constants.  Critical circles ``(r, k)`` reduce to ``rho_{-k} = 1, eta = k``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import expit

from .fourier_loop import (
    TWO_PI,
    CriticalPointId,
    FourierLoop,
    RabinowitzPoint,
    action,
    is_critical,
)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
SEED_OFFSET = 1e-6
DETECT_TOL = 1e-9
CONVERGENCE_WINDOW = 2.0
BLOWUP_NORM = 1e6


class VortexFlowError(RuntimeError):
    pass


class StepSizeUnderflow(VortexFlowError):
    """Adaptive integration stalled or the amplitudes left every bounded set."""


class NotConverged(VortexFlowError):
    pass


class OrderViolation(ValueError):
    pass


class DegenerateAsymptotics(ValueError):
    """Both ends on the same critical circle: the vortex count is not defined."""


@dataclass(frozen=True, eq=False)
class ReducedState:
    band_lo: int
    band_hi: int
    rho: np.ndarray
    phases: np.ndarray
    eta: float

    def __post_init__(self) -> None:
        n = self.band_hi - self.band_lo + 1
        rho = np.asarray(self.rho, dtype=float).reshape(-1)
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        if rho.shape != (n,) or phases.shape != (n,):
            raise ValueError("rho and phases must have one entry per band mode")
        if np.any(rho < 0):
            raise ValueError("amplitudes must be nonnegative")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.band_lo, self.band_hi + 1)

    @property
    def band(self) -> tuple[int, int]:
        return (self.band_lo, self.band_hi)

    def to_point(self) -> RabinowitzPoint:
        coeffs = self.rho * np.exp(1j * self.phases)
        return RabinowitzPoint(FourierLoop(self.band_lo, self.band_hi, coeffs), self.eta)

    @classmethod
    def from_point(cls, p: RabinowitzPoint) -> "ReducedState":
        c = p.loop.coeffs
        return cls(p.loop.band_lo, p.loop.band_hi, np.abs(c), np.angle(c), p.eta)

    @classmethod
    def critical(cls, k: int, band: tuple[int, int], r: float = 0.0) -> "ReducedState":
        lo, hi = band
        if not lo <= -k <= hi:
            raise ValueError(f"band {band} does not contain mode {-k}")
        rho = np.zeros(hi - lo + 1)
        rho[-k - lo] = 1.0
        phases = np.zeros_like(rho)
        phases[-k - lo] = -TWO_PI * r
        return cls(lo, hi, rho, phases, float(k))

    def vector(self) -> np.ndarray:
        return np.append(self.rho, self.eta)

    def with_vector(self, y: np.ndarray) -> "ReducedState":
        return ReducedState(self.band_lo, self.band_hi, np.maximum(y[:-1], 0.0), self.phases, y[-1])

    def widen(self, lo: int, hi: int) -> "ReducedState":
        if lo > self.band_lo or hi < self.band_hi:
            raise ValueError("widen() cannot drop modes")
        rho = np.zeros(hi - lo + 1)
        phases = np.zeros(hi - lo + 1)
        sl = slice(self.band_lo - lo, self.band_hi - lo + 1)
        rho[sl] = self.rho
        phases[sl] = self.phases
        return ReducedState(lo, hi, rho, phases, self.eta)


@dataclass(frozen=True)
class FlowDerivative:
    rho: np.ndarray
    eta: float

    def norm(self) -> float:
        return math.sqrt(float(self.rho @ self.rho) + self.eta**2)


def _rhs(modes: np.ndarray) -> Callable[[float, np.ndarray], np.ndarray]:
    rate = TWO_PI * modes

    def f(s: float, y: np.ndarray) -> np.ndarray:
        out = np.empty_like(y)
        rho = y[:-1]
        out[:-1] = (rate + TWO_PI * y[-1]) * rho
        out[-1] = math.pi * (rho @ rho - 1.0)
        return out

    return f


def _chart_rhs(modes: np.ndarray, k: int) -> Callable[[float, np.ndarray], np.ndarray]:
    """The reduced field in deviations ``z = y - crit(k)``, free of cancellation near crit(k)."""
    i0 = int(np.flatnonzero(modes == -k)[0])
    rate = TWO_PI * (modes + k)

    def f(s: float, z: np.ndarray) -> np.ndarray:
        out = np.empty_like(z)
        d = z[:-1]
        zeta = z[-1]
        out[:-1] = (rate + TWO_PI * zeta) * d
        out[i0] += TWO_PI * zeta
        out[-1] = math.pi * (2.0 * d[i0] + d @ d)
        return out

    return f


def _jacobian(modes: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = modes.size
    rho, eta = y[:-1], y[-1]
    jac = np.zeros((n + 1, n + 1))
    jac[np.arange(n), np.arange(n)] = TWO_PI * (modes + eta)
    jac[:n, n] = TWO_PI * rho
    jac[n, :n] = TWO_PI * rho
    return jac


def _critical_vector(modes: np.ndarray, k: int) -> np.ndarray:
    y = np.zeros(modes.size + 1)
    y[int(np.flatnonzero(modes == -k)[0])] = 1.0
    y[-1] = k
    return y


def vector_field(state: ReducedState) -> FlowDerivative:
    y = _rhs(state.modes)(0.0, state.vector())
    return FlowDerivative(y[:-1], float(y[-1]))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A sampled flow line.

    ``integrated_span`` is the part of ``s`` produced by numerical integration;
    samples outside it belong to the linearized tails at the critical ends.
    ``profile``, when set, is an exact closed form used by :meth:`state_at`.
    """

    band_lo: int
    band_hi: int
    phases: np.ndarray
    s: np.ndarray
    rho: np.ndarray
    eta: np.ndarray
    neg_limit: Optional[CriticalPointId] = None
    pos_limit: Optional[CriticalPointId] = None
    neg_converged: bool = False
    pos_converged: bool = False
    integrated_span: Optional[tuple[float, float]] = None
    profile: Optional[Callable[[float], ReducedState]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("trajectory needs at least one sample")
        if np.any(np.diff(s) <= 0):
            raise ValueError("sample positions must be strictly increasing")
        rho = np.asarray(self.rho, dtype=float).reshape(s.size, self.band_hi - self.band_lo + 1)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(s.size))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.band_lo, self.band_hi + 1)

    @property
    def band(self) -> tuple[int, int]:
        return (self.band_lo, self.band_hi)

    def __len__(self) -> int:
        return self.s.size

    def state(self, i: int) -> ReducedState:
        return ReducedState(self.band_lo, self.band_hi, self.rho[i], self.phases, self.eta[i])

    @property
    def samples(self) -> list[tuple[float, ReducedState]]:
        return [(float(self.s[i]), self.state(i)) for i in range(len(self))]

    @cached_property
    def _values(self) -> np.ndarray:
        return np.column_stack([self.rho, self.eta])

    @cached_property
    def _derivatives(self) -> np.ndarray:
        f = _rhs(self.modes)
        return np.array([f(0.0, y) for y in self._values])

    @cached_property
    def _spline(self) -> Optional[CubicHermiteSpline]:
        if len(self) < 2:
            return None
        return CubicHermiteSpline(self.s, self._values, self._derivatives)

    def state_at(self, s: float) -> ReducedState:
        """State at arbitrary ``s``; beyond the samples a converged end is held at its limit."""
        if self.profile is not None:
            return self.profile(s)
        if s < self.s[0] or s > self.s[-1]:
            neg = s < self.s[0]
            limit = self.neg_limit if neg else self.pos_limit
            ok = self.neg_converged if neg else self.pos_converged
            if limit is None or not ok:
                raise NotConverged(f"s={s} lies outside an unconverged end of the trajectory")
            crit = ReducedState.critical(limit.k, self.band)
            return ReducedState(self.band_lo, self.band_hi, crit.rho, self.phases, crit.eta)
        if self._spline is None:
            return self.state(0)
        y = self._spline(s)
        return ReducedState(self.band_lo, self.band_hi, np.maximum(y[:-1], 0.0), self.phases, y[-1])

    def gradient_norms(self) -> np.ndarray:
        return np.linalg.norm(self._derivatives, axis=1)

    def actions(self) -> np.ndarray:
        return np.array([action(self.state(i).to_point()) for i in range(len(self))])

    def shifted(self, ds: float) -> "Trajectory":
        """Time-translate by ``ds`` (the sample at ``s`` moves to ``s + ds``)."""
        span = None
        if self.integrated_span is not None:
            span = (self.integrated_span[0] + ds, self.integrated_span[1] + ds)
        prof = None
        if self.profile is not None:
            inner = self.profile
            prof = lambda s: inner(s - ds)  # noqa: E731
        return replace(self, s=self.s + ds, integrated_span=span, profile=prof)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["s", "eta"] + [f"rho_{m}" for m in self.modes])
        for i in range(len(self)):
            row = [self.s[i], self.eta[i], *self.rho[i]]
            writer.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()


def act_on_state(g: tuple[float, int], state: ReducedState) -> ReducedState:
    """Reduced form of the ``(r, k)`` action: modes shift by ``-k``, phases by ``-2 pi r``."""
    r, k = float(g[0]), int(g[1])
    return ReducedState(state.band_lo - k, state.band_hi - k, state.rho, state.phases - TWO_PI * r, state.eta + k)


def act_on_trajectory(g: tuple[float, int], traj: Trajectory) -> Trajectory:
    r, k = float(g[0]), int(g[1])

    def moved(c: Optional[CriticalPointId]) -> Optional[CriticalPointId]:
        return None if c is None else CriticalPointId(c.r + r, c.k + k)

    prof = None
    if traj.profile is not None:
        inner = traj.profile
        prof = lambda s: act_on_state(g, inner(s))  # noqa: E731
    return replace(
        traj,
        band_lo=traj.band_lo - k,
        band_hi=traj.band_hi - k,
        phases=traj.phases - TWO_PI * r,
        eta=traj.eta + k,
        neg_limit=moved(traj.neg_limit),
        pos_limit=moved(traj.pos_limit),
        profile=prof,
    )


def _detect_limit(state: ReducedState, tol: float) -> Optional[CriticalPointId]:
    return is_critical(state.to_point(), tol)


def _window_converged(traj: Trajectory, at_end: bool, tol: float, window: float) -> bool:
    g = traj.gradient_norms()
    if at_end:
        mask = traj.s >= traj.s[-1] - window
    else:
        mask = traj.s <= traj.s[0] + window
    return bool(traj.s[-1] - traj.s[0] >= window and np.all(g[mask] < tol))


def integrate(
    state: ReducedState,
    s0: float,
    s1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    detect_tol: float = DETECT_TOL,
) -> Trajectory:
    """Integrate the reduced flow with the Dormand-Prince 5(4) pair.

    Raises :class:`StepSizeUnderflow` when the step controller stalls or the
    state norm exceeds ``BLOWUP_NORM`` (finite-time blow-up of the amplitudes).
    """
    if not s0 < s1:
        raise ValueError("need s0 < s1")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")

    def blowup(s: float, y: np.ndarray) -> float:
        return BLOWUP_NORM - float(np.max(np.abs(y)))

    blowup.terminal = True  # type: ignore[attr-defined]
    sol = solve_ivp(
        _rhs(state.modes), (s0, s1), state.vector(), method="RK45", rtol=rtol, atol=atol, events=blowup
    )
    if sol.status == -1:
        raise StepSizeUnderflow(f"step size underflow near s={sol.t[-1]:.6g}: {sol.message}")
    if sol.status == 1:
        raise StepSizeUnderflow(f"amplitudes diverging (|state| > {BLOWUP_NORM:g}) near s={sol.t[-1]:.6g}")
    traj = Trajectory(
        state.band_lo,
        state.band_hi,
        state.phases,
        sol.t,
        sol.y[:-1].T,
        sol.y[-1],
        integrated_span=(s0, s1),
    )
    neg = _detect_limit(traj.state(0), detect_tol)
    pos = _detect_limit(traj.state(len(traj) - 1), detect_tol)
    return replace(traj, neg_limit=neg, pos_limit=pos, neg_converged=neg is not None, pos_converged=pos is not None)


def explicit_vortex(s: float) -> ReducedState:
    """Closed-form connection from crit(0, 1) to crit(0, 0).

    ``eta = 1/(1 + exp(2 pi s))``, ``rho_{-1} = eta``, ``rho_0 = 1 - eta``.
    """
    eta = float(expit(-TWO_PI * s))
    return ReducedState(-1, 0, np.array([eta, float(expit(TWO_PI * s))]), np.zeros(2), eta)


def explicit_vortex_trajectory(s0: float = -10.0, s1: float = 10.0, n: int = 4001) -> Trajectory:
    s = np.linspace(s0, s1, n)
    eta = expit(-TWO_PI * s)
    rho = np.column_stack([eta, expit(TWO_PI * s)])
    return Trajectory(
        -1,
        0,
        np.zeros(2),
        s,
        rho,
        eta,
        neg_limit=CriticalPointId(0.0, 1),
        pos_limit=CriticalPointId(0.0, 0),
        neg_converged=True,
        pos_converged=True,
        profile=explicit_vortex,
    )


def constant_trajectory(cid: CriticalPointId, band: tuple[int, int], s0: float = -10.0, s1: float = 10.0) -> Trajectory:
    crit = ReducedState.critical(cid.k, band, cid.r)
    s = np.linspace(s0, s1, 3)
    return Trajectory(
        band[0],
        band[1],
        crit.phases,
        s,
        np.tile(crit.rho, (3, 1)),
        np.full(3, crit.eta),
        neg_limit=cid,
        pos_limit=cid,
        neg_converged=True,
        pos_converged=True,
        profile=lambda _s: crit,
    )


def energy(traj: Trajectory, n: Optional[int] = None) -> float:
    """``int |d_s u|^2 + |d_s eta|^2 ds`` via Parseval, Simpson on a uniform resampling."""
    if not (traj.neg_converged and traj.pos_converged):
        raise NotConverged("energy needs a trajectory converged at both ends")
    if len(traj) < 2:
        return 0.0
    a, b = float(traj.s[0]), float(traj.s[-1])
    if n is None:
        n = 2 * int(math.ceil((b - a) / 5e-4)) + 1
    grid = np.linspace(a, b, n)
    f = _rhs(traj.modes)
    dens = np.empty(n)
    for i, s in enumerate(grid):
        d = f(0.0, traj.state_at(s).vector())
        dens[i] = d @ d
    return float(simpson(dens, x=grid))


def admissible_intermediate_modes(k_minus: int, k_plus: int) -> set[int]:
    """Modes that can decay at both ends of a flow line from k_minus to k_plus."""
    if k_minus < k_plus:
        raise OrderViolation(f"k_minus={k_minus} < k_plus={k_plus}")
    return set(range(-k_minus + 1, -k_plus))


@dataclass
class _Shot:
    theta: float
    outcome: int
    first: object = None
    second: object = None


class _Shooter:
    """Unstable-manifold shooting from crit(k_minus) toward crit(k_plus).

    Integration runs in deviation coordinates about the source until
    ``eta = k_plus + 1/2``, then about the target, so that offsets of order
    ``eps`` and the final approach are both resolved to full precision.
    """

    def __init__(
        self,
        k_minus: int,
        k_plus: int,
        band: tuple[int, int],
        eps: float,
        extra_seed: float,
        rtol: float,
        atol: float,
        s_max: float,
    ):
        self.km, self.kp = k_minus, k_plus
        self.band = band
        self.modes = np.arange(band[0], band[1] + 1)
        self.eps = eps
        self.rtol, self.atol = rtol, atol
        self.s_max = s_max
        n = self.modes.size
        self.i_src = int(np.flatnonzero(self.modes == -k_minus)[0])
        self.i_tgt = int(np.flatnonzero(self.modes == -k_plus)[0])
        self.c_src = _critical_vector(self.modes, k_minus)
        self.c_tgt = _critical_vector(self.modes, k_plus)
        self.f_src = _chart_rhs(self.modes, k_minus)
        self.f_tgt = _chart_rhs(self.modes, k_plus)
        self.v_block = np.zeros(n + 1)
        self.v_block[self.i_src] = self.v_block[-1] = 1.0 / math.sqrt(2.0)
        self.v_mode = np.zeros(n + 1)
        self.v_mode[self.i_tgt] = 1.0
        # Modes below -k_minus are stable at the source; seeding them is optional.
        self.extra = np.zeros(n + 1)
        self.extra[: self.i_src] = extra_seed
        self.lam_src, self.vec_src = np.linalg.eigh(_jacobian(self.modes, self.c_src))
        self.lam_tgt, self.vec_tgt = np.linalg.eigh(_jacobian(self.modes, self.c_tgt))

    def seed(self, theta: float) -> np.ndarray:
        return self.eps * (math.cos(theta) * self.v_block + math.sin(theta) * self.v_mode) + self.extra

    def _events(self) -> tuple:
        mid_level = self.kp + 0.5 - self.km
        up_level = 0.5

        def mid(s: float, z: np.ndarray) -> float:
            return z[-1] - mid_level

        mid.terminal = True  # type: ignore[attr-defined]
        mid.direction = -1  # type: ignore[attr-defined]

        def up(s: float, z: np.ndarray) -> float:
            return z[-1] - up_level

        up.terminal = True  # type: ignore[attr-defined]
        return mid, up

    def run(self, theta: float) -> _Shot:
        mid, up = self._events()
        first = solve_ivp(
            self.f_src, (0.0, self.s_max), self.seed(theta), method="RK45",
            rtol=self.rtol, atol=self.atol, events=(mid, up), dense_output=True,
        )
        if first.status == -1:
            raise StepSizeUnderflow(first.message)
        if first.t_events[1].size:
            return _Shot(theta, +1, first)
        if not first.t_events[0].size:
            return _Shot(theta, 0, first)
        z1 = (self.c_src - self.c_tgt) + first.y[:, -1]
        hi_level = self.km - self.kp + 0.5

        def high(s: float, z: np.ndarray) -> float:
            return z[-1] - hi_level

        def low(s: float, z: np.ndarray) -> float:
            return z[-1] + 0.5

        high.terminal = low.terminal = True  # type: ignore[attr-defined]
        s_mid = float(first.t[-1])
        second = solve_ivp(
            self.f_tgt, (s_mid, s_mid + self.s_max), z1, method="RK45",
            rtol=self.rtol, atol=self.atol * 1e-2, events=(high, low),
        )
        if second.status == -1:
            raise StepSizeUnderflow(second.message)
        outcome = +1 if second.t_events[0].size else (-1 if second.t_events[1].size else 0)
        return _Shot(theta, outcome, first, second)

    def closure(self, shot: _Shot) -> tuple[float, int]:
        """Smallest error of cutting the approach and continuing on the stable subspace."""
        if shot.second is None:
            return math.inf, -1
        z = shot.second.y.T
        unstable = self.vec_tgt[:, self.lam_tgt > 0]
        res = np.linalg.norm(z @ unstable, axis=1) + np.sum(z * z, axis=1)
        j = int(np.argmin(res))
        return float(res[j]), j

    def _tail(self, z0: np.ndarray, lam: np.ndarray, vec: np.ndarray, sign: int, floor: float = 1e-18) -> tuple[np.ndarray, np.ndarray]:
        keep = lam > 0 if sign < 0 else lam < 0
        coef = vec[:, keep].T @ z0
        rates = lam[keep]
        mag = float(np.max(np.abs(coef))) if coef.size else 0.0
        if mag <= floor:
            return np.empty(0), np.empty((0, z0.size))
        length = math.log(mag / floor) / float(np.min(np.abs(rates)))
        ds = np.arange(1, int(math.ceil(length * 64)) + 1) / 64.0
        if sign < 0:
            ds = -ds[::-1]
        z = (np.exp(np.outer(ds, rates)) * coef) @ vec[:, keep].T
        return ds, z

    def build(self, shot: _Shot, tol: float) -> Optional[Trajectory]:
        residual, j = self.closure(shot)
        if residual >= tol:
            return None
        first, second = shot.first, shot.second
        s_gauge = float(first.t_events[0][0])
        z0 = first.y[:, 0]
        lam_s = self.lam_src
        stable_src = self.vec_src[:, lam_s < 0]
        neg_residual = float(np.linalg.norm(stable_src.T @ z0))
        neg_ok = neg_residual < tol

        parts_s = [first.t, second.t[1 : j + 1]]
        parts_y = [first.y.T + self.c_src, second.y.T[1 : j + 1] + self.c_tgt]
        if neg_ok:
            ds, zt = self._tail(z0, self.lam_src, self.vec_src, -1)
            parts_s.insert(0, ds)
            parts_y.insert(0, zt + self.c_src)
        z_cut = second.y[:, j]
        s_cut = float(second.t[j])
        ds, zt = self._tail(z_cut, self.lam_tgt, self.vec_tgt, +1)
        parts_s.append(s_cut + ds)
        parts_y.append(zt + self.c_tgt)
        s = np.concatenate(parts_s) - s_gauge
        y = np.vstack(parts_y)
        integrated = y[(s >= -s_gauge) & (s <= s_cut - s_gauge)]
        if not np.all(np.diff(integrated[:, -1]) < 0):
            raise VortexFlowError("eta is not strictly monotone along the shot; time gauge undefined")
        traj = Trajectory(
            self.band[0],
            self.band[1],
            np.zeros(self.modes.size),
            s,
            np.maximum(y[:, :-1], 0.0),
            y[:, -1],
            neg_limit=CriticalPointId(0.0, self.km),
            pos_limit=CriticalPointId(0.0, self.kp),
            neg_converged=neg_ok,
            pos_converged=True,
            integrated_span=(-s_gauge, s_cut - s_gauge),
            meta={
                "theta": shot.theta,
                "pos_residual": residual,
                "neg_residual": neg_residual,
                "eta0": self.kp + 0.5,
            },
        )
        return traj


def shoot(
    k_minus: int,
    k_plus: int,
    band: Optional[tuple[int, int]] = None,
    n_shots: int = 64,
    tol: float = 1e-6,
    eps: float = SEED_OFFSET,
    extra_seed: float = 0.0,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    s_max: float = 30.0,
    workers: Optional[int] = None,
) -> list[Trajectory]:
    """Find vortices from crit(k_minus) to crit(k_plus) by shooting along unstable directions.

    Seeds leave the source along ``cos(theta) * v + sin(theta) * e`` where ``v``
    is the unstable (amplitude, eta) direction of the source circle and ``e``
    the target mode; both grow at rate 2 pi.  Unstable modes above
    ``-k_plus`` are never seeded: their rate stays positive at the target, so
    no trajectory carrying them can converge there.  A sweep over ``n_shots``
    angles classifies each shot by which side of the target it leaves
    through; every sign change is refined by bisection to the last float.

    Returned trajectories are normalized so that ``eta(0) = k_plus + 1/2`` and
    are completed at both ends by the linearized flow of the critical circle
    (see ``meta['pos_residual']`` for the size of the dropped unstable part).
    """
    if k_minus != k_plus + 1:
        raise ValueError("shoot() needs adjacent asymptotics, k_minus = k_plus + 1")
    if band is None:
        band = (-k_minus - 1, -k_plus + 1)
    if not (band[0] <= -k_minus and -k_plus <= band[1]):
        raise ValueError(f"band {band} must contain modes {-k_minus} and {-k_plus}")
    if n_shots < 2:
        raise ValueError("need at least two shots")
    shooter = _Shooter(k_minus, k_plus, band, eps, extra_seed, rtol, atol, s_max)
    thetas = [math.pi * (j + 0.5) / n_shots for j in range(n_shots)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sweep = list(pool.map(shooter.run, thetas))
    else:
        sweep = [shooter.run(t) for t in thetas]

    candidates: list[_Shot] = [shot for shot in sweep if shot.outcome == 0]
    for left, right in zip(sweep, sweep[1:]):
        if left.outcome == 0 or right.outcome == 0 or left.outcome == right.outcome:
            continue
        a, b = left, right
        while True:
            mid_theta = 0.5 * (a.theta + b.theta)
            if not a.theta < mid_theta < b.theta:
                break
            shot = shooter.run(mid_theta)
            if shot.outcome == 0:
                a = b = shot
                break
            if shot.outcome == a.outcome:
                a = shot
            else:
                b = shot
        candidates.append(min((a, b), key=lambda sh: shooter.closure(sh)[0]))

    found: list[Trajectory] = []
    for shot in sorted(candidates, key=lambda sh: sh.theta):
        traj = shooter.build(shot, tol)
        if traj is None:
            continue
        here = traj.state_at(0.0).vector()
        if any(np.linalg.norm(other.state_at(0.0).vector() - here) < 1e-6 for other in found):
            continue
        found.append(traj)
    return found


def count_vortices(k_minus: int, k_plus: int, **shoot_kwargs) -> int:
    """Mod-2 count of unparametrized vortices between adjacent critical circles.

    Phases are frozen by the reduction, so both circle actions are already
    quotiented; the time shift is removed by the ``eta(0)`` gauge in :func:`shoot`.
    """
    return len(find_vortex_orbits(k_minus, k_plus, **shoot_kwargs)) % 2


def find_vortex_orbits(k_minus: int, k_plus: int, **shoot_kwargs) -> list[Trajectory]:
    if k_minus < k_plus:
        raise OrderViolation(f"k_minus={k_minus} < k_plus={k_plus}: the action cannot increase")
    if k_minus == k_plus:
        raise DegenerateAsymptotics("equal asymptotics: only constant solutions, count undefined")
    if k_minus != k_plus + 1:
        raise ValueError("the vortex count is defined for k_minus = k_plus + 1")
    return shoot(k_minus, k_plus, **shoot_kwargs)


def vortex_report(k_minus: int, k_plus: int, **shoot_kwargs) -> dict:
    orbits = find_vortex_orbits(k_minus, k_plus, **shoot_kwargs)
    entries = []
    for traj in orbits:
        st = traj.state_at(0.0)
        entries.append(
            {
                "theta": traj.meta["theta"],
                "eta0": st.eta,
                "rho0": {str(m): float(r) for m, r in zip(st.modes, st.rho) if r > 0},
                "pos_residual": traj.meta["pos_residual"],
                "neg_residual": traj.meta["neg_residual"],
                "energy": energy(traj),
            }
        )
    return {"k_minus": k_minus, "k_plus": k_plus, "count_mod2": len(orbits) % 2, "orbits": entries}


def window_converged(traj: Trajectory, tol: float = DETECT_TOL, window: float = CONVERGENCE_WINDOW) -> tuple[bool, bool]:
    """Whether the first/last ``window`` units of ``s`` have gradient norm below ``tol``."""
    return _window_converged(traj, False, tol, window), _window_converged(traj, True, tol, window)


def max_deviation_from_explicit(traj: Trajectory, samples: Optional[Sequence[float]] = None) -> float:
    """Sup-norm distance to the closed-form vortex (after the group shift to (k_minus, k_plus))."""
    if traj.neg_limit is None or traj.pos_limit is None:
        raise NotConverged("trajectory has no identified limits")
    k = traj.pos_limit.k
    if samples is None:
        samples = traj.s
    worst = 0.0
    for s in samples:
        st = traj.state_at(float(s))
        ref = act_on_state((0.0, k), explicit_vortex(float(s))).widen(*traj.band)
        worst = max(worst, float(np.max(np.abs(st.rho - ref.rho))), abs(st.eta - ref.eta))
    return worst
