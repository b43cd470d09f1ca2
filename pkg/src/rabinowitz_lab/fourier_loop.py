"""Loops in the complex plane stored as finitely many Fourier modes.

A loop is ``u(t) = sum_m a_m exp(2 pi i m t)`` for ``m`` in an inclusive band
``[band_lo, band_hi]``.  Everything here is exact in the Fourier
representation: the Liouville area, the moment integral, the Rabinowitz
action and its L2 gradient are finite sums over the modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

WINDING_SAMPLES = 4096
WINDING_TOL = 1e-9


class LoopThroughOrigin(ValueError):
    """Raised when the winding number of a loop hitting the origin is requested."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FourierLoop:
    band_lo: int
    band_hi: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.band_lo > self.band_hi:
            raise ValueError(f"empty band [{self.band_lo}, {self.band_hi}]")
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (self.band_hi - self.band_lo + 1,):
            raise ValueError(
                f"expected {self.band_hi - self.band_lo + 1} coefficients, got shape {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @classmethod
    def from_modes(cls, modes: dict[int, complex], band: Optional[tuple[int, int]] = None) -> "FourierLoop":
        """Build a loop from a ``{mode: amplitude}`` mapping."""
        if band is None:
            if not modes:
                band = (0, 0)
            else:
                band = (min(modes), max(modes))
        lo, hi = band
        coeffs = np.zeros(hi - lo + 1, dtype=complex)
        for m, a in modes.items():
            if not lo <= m <= hi:
                raise ValueError(f"mode {m} outside band [{lo}, {hi}]")
            coeffs[m - lo] = a
        return cls(lo, hi, coeffs)

    @classmethod
    def zero(cls, band: tuple[int, int] = (0, 0)) -> "FourierLoop":
        return cls(band[0], band[1], np.zeros(band[1] - band[0] + 1, dtype=complex))

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.band_lo, self.band_hi + 1)

    def coeff(self, m: int) -> complex:
        if self.band_lo <= m <= self.band_hi:
            return complex(self.coeffs[m - self.band_lo])
        return 0j

    def widen(self, lo: int, hi: int) -> "FourierLoop":
        """Same loop on a band containing the current one."""
        if lo > self.band_lo or hi < self.band_hi:
            raise ValueError("widen() cannot drop modes")
        coeffs = np.zeros(hi - lo + 1, dtype=complex)
        coeffs[self.band_lo - lo : self.band_hi - lo + 1] = self.coeffs
        return FourierLoop(lo, hi, coeffs)

    def samples(self, n: int) -> np.ndarray:
        """Values at the ``n`` uniform times ``t_j = j/n``."""
        t = np.arange(n) / n
        return np.exp(TWO_PI * 1j * np.outer(t, self.modes)) @ self.coeffs

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FourierLoop):
            return NotImplemented
        return (
            self.band_lo == other.band_lo
            and self.band_hi == other.band_hi
            and bool(np.array_equal(self.coeffs, other.coeffs))
        )

    def __hash__(self) -> int:
        return hash((self.band_lo, self.band_hi, self.coeffs.tobytes()))


@dataclass(frozen=True)
class RabinowitzPoint:
    """A loop together with its Lagrange multiplier ``eta``."""

    loop: FourierLoop
    eta: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.eta):
            raise ValueError("eta must be finite")
        object.__setattr__(self, "eta", float(self.eta))

    def to_json(self) -> dict:
        return {
            "band_lo": self.loop.band_lo,
            "band_hi": self.loop.band_hi,
            "coeffs": [[float(a.real), float(a.imag)] for a in self.loop.coeffs],
            "eta": self.eta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RabinowitzPoint":
        coeffs = [complex(re, im) for re, im in data["coeffs"]]
        loop = FourierLoop(int(data["band_lo"]), int(data["band_hi"]), np.array(coeffs, dtype=complex))
        return cls(loop, float(data["eta"]))


@dataclass(frozen=True)
class CriticalPointId:
    """Label ``(r, k)`` of the critical point ``(r, k)_*(1, 0)``."""

    r: float
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", float(self.r) % 1.0)
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class Tangent:
    """Tangent vector at a Rabinowitz point: per-mode complex part plus an eta part."""

    band_lo: int
    band_hi: int
    loop: np.ndarray
    eta: float

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.loop) ** 2)) + self.eta**2)


def eval_loop(loop: FourierLoop, t: float) -> complex:
    return complex(np.sum(loop.coeffs * np.exp(TWO_PI * 1j * loop.modes * t)))


def symplectic_area(loop: FourierLoop) -> float:
    """Integral of ``x dy`` over the loop, ``sum_m pi m |a_m|^2``."""
    return float(math.pi * np.sum(loop.modes * np.abs(loop.coeffs) ** 2))


def moment_integral(loop: FourierLoop) -> float:
    """Time average of ``mu(u) = pi(|u|^2 - 1)``, by Parseval."""
    return float(math.pi * (np.sum(np.abs(loop.coeffs) ** 2) - 1.0))


def action(p: RabinowitzPoint) -> float:
    return -symplectic_area(p.loop) - p.eta * moment_integral(p.loop)


def action_gradient(p: RabinowitzPoint) -> Tangent:
    """L2 gradient of the action; the vortex flow is ``d/ds = -gradient``."""
    loop = p.loop
    comp = -TWO_PI * (loop.modes + p.eta) * loop.coeffs
    return Tangent(loop.band_lo, loop.band_hi, comp, -moment_integral(loop))


def group_act(g: tuple[float, int], p: RabinowitzPoint) -> RabinowitzPoint:
    """Apply ``(r, k)``: rotate the target by ``-r``, twist by ``-k`` turns, shift eta by ``k``.

    Mode ``m`` moves to ``m - k`` and is multiplied by ``exp(-2 pi i r)``.
    """
    r, k = float(g[0]), int(g[1])
    phase = np.exp(-TWO_PI * 1j * r)
    loop = FourierLoop(p.loop.band_lo - k, p.loop.band_hi - k, p.loop.coeffs * phase)
    return RabinowitzPoint(loop, p.eta + k)


def critical_point(cid: CriticalPointId) -> RabinowitzPoint:
    m = -cid.k
    loop = FourierLoop(m, m, np.array([np.exp(-TWO_PI * 1j * cid.r)]))
    return RabinowitzPoint(loop, float(cid.k))


def winding_number(loop: FourierLoop, tol: float = WINDING_TOL, samples: int = WINDING_SAMPLES) -> int:
    """Degree of ``t -> u(t)/|u(t)|`` from summed principal-value argument increments."""
    u = loop.samples(samples)
    if np.min(np.abs(u)) <= tol:
        raise LoopThroughOrigin(f"min |u(t)| <= {tol}; winding number undefined")
    steps = np.angle(np.roll(u, -1) / u)
    return int(round(float(np.sum(steps)) / TWO_PI))


def is_critical(p: RabinowitzPoint, tol: float = 1e-8) -> Optional[CriticalPointId]:
    """Identify ``p`` as ``critical_point((r, k))`` if it is one within ``tol``."""
    if action_gradient(p).norm() >= tol:
        return None
    mass = np.abs(p.loop.coeffs) ** 2
    total = float(mass.sum())
    if total == 0.0:
        return None
    j = int(np.argmax(mass))
    if mass[j] < (1.0 - tol) * total:
        return None
    k = -(p.loop.band_lo + j)
    if abs(p.eta - k) >= tol:
        return None
    r = -float(np.angle(p.loop.coeffs[j])) / TWO_PI
    return CriticalPointId(r, k)


def tangent_to_vector(v: Tangent) -> np.ndarray:
    """Real coordinates ``(Re a_lo, Im a_lo, ..., eta)`` of a tangent vector."""
    out = np.empty(2 * v.loop.size + 1)
    out[0:-1:2] = v.loop.real
    out[1:-1:2] = v.loop.imag
    out[-1] = v.eta
    return out


def point_to_vector(p: RabinowitzPoint) -> np.ndarray:
    out = np.empty(2 * p.loop.coeffs.size + 1)
    out[0:-1:2] = p.loop.coeffs.real
    out[1:-1:2] = p.loop.coeffs.imag
    out[-1] = p.eta
    return out


def vector_to_point(x: Sequence[float], band: tuple[int, int]) -> RabinowitzPoint:
    x = np.asarray(x, dtype=float)
    coeffs = x[0:-1:2] + 1j * x[1:-1:2]
    return RabinowitzPoint(FourierLoop(band[0], band[1], coeffs), float(x[-1]))
