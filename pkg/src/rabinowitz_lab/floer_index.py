"""Integer bookkeeping for Conley-Zehnder shifts, moduli dimensions and twist admissibility.

Everything here is exact arithmetic on abstract inputs.  The Auroux constant
``kappa`` in particular is an input: it is an infimum over almost complex
structures and is never computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, NamedTuple

Variant = Literal["base", "homotopy", "even_h3"]
VARIANTS: tuple[str, ...] = ("base", "homotopy", "even_h3")


class PreconditionViolation(ValueError):
    pass


class BothConstant(ValueError):
    """Both halves of a broken oni are constant, which leaves no flow line at all."""


@dataclass(frozen=True)
class IndexDatum:
    mu_cz: int
    winding: int

    @property
    def shifted(self) -> int:
        return cz_shift(self.mu_cz, self.winding)


@dataclass(frozen=True)
class GeometryDatum:
    n: int
    kappa: float
    nu: int
    omega_v: float = 1.0
    c1_tm: int = 0

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionViolation(f"n must be a positive integer, got {self.n}")
        if int(self.nu) != self.nu or self.nu < 1:
            raise PreconditionViolation(f"nu must be a positive integer, got {self.nu}")
        if self.kappa < 0:
            raise PreconditionViolation(f"kappa must be nonnegative, got {self.kappa}")
        if int(self.c1_tm) != self.c1_tm:
            raise PreconditionViolation("c1_tm must be an integer")


def cz_shift(base_mu: int, winding: int) -> int:
    """Index of a lifted orbit: each unit of winding lowers it by two."""
    return int(base_mu) - 2 * int(winding)


def flow_moduli_dim(mu_minus: int, mu_plus: int) -> int:
    """Dimension of unparametrized Floer flow lines: index difference minus one."""
    return int(mu_minus) - int(mu_plus) - 1


def oni_moduli_dim(mu_minus: int, mu_plus: int) -> int:
    """Dimension of the oni moduli space: index difference minus two."""
    return int(mu_minus) - int(mu_plus) - 2


def nu_threshold(g: GeometryDatum, variant: Variant = "base") -> float:
    """The number ``nu`` must strictly exceed for the given admissibility variant."""
    if variant == "base":
        return max(g.n + g.kappa - 2, g.kappa)
    if variant == "homotopy":
        return max(g.n + g.kappa - 1, g.kappa)
    if variant == "even_h3":
        return g.n + g.kappa
    raise PreconditionViolation(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def nu_admissible(g: GeometryDatum, variant: Variant = "base") -> bool:
    ok = g.nu > nu_threshold(g, variant)
    if variant == "even_h3":
        ok = ok and g.nu % 2 == 0
    return bool(ok)


def chern_upper_bound(g: GeometryDatum) -> float:
    """Upper bound ``(kappa - nu) omega_v`` on the first Chern number of a sphere in the total space."""
    if g.omega_v <= 0:
        raise PreconditionViolation("omega_v must be positive for a nonconstant sphere")
    return (g.kappa - g.nu) * g.omega_v


def sphere_virdim(dim_e: int, c1_total: int) -> int:
    """Riemann-Roch dimension ``2 dim + 2 c1 - 6`` of unparametrized spheres; ``dim_e`` is complex."""
    if int(dim_e) != dim_e or dim_e < 1:
        raise PreconditionViolation(f"dim_e must be a positive integer, got {dim_e}")
    return 2 * int(dim_e) + 2 * int(c1_total) - 6


class VirdimBound(NamedTuple):
    strict_bound: int
    conclusion: int

    def to_json(self) -> dict:
        return {"strict_bound": self.strict_bound, "conclusion": self.conclusion}


def virdim_bound(g: GeometryDatum) -> VirdimBound:
    """Bound on the sphere dimension in the total space.

    ``virdim < 2n - 4 - 2 max(n - 2, 0) omega_v``; since the dimension is even
    it is at most the largest even integer below that, and at most ``-2``.
    """
    if g.omega_v < 1:
        raise PreconditionViolation(f"omega_v={g.omega_v} < 1; an integral class gives omega_v >= 1")
    if not nu_admissible(g, "base"):
        raise PreconditionViolation(f"nu={g.nu} is not base-admissible (needs nu > {nu_threshold(g, 'base')})")
    raw = Fraction(2 * g.n - 4) - 2 * max(g.n - 2, 0) * Fraction(g.omega_v)
    below = math.ceil(raw) - 1
    if below % 2:
        below -= 1
    if int(raw) != raw:
        raw_out = float(raw)
    else:
        raw_out = int(raw)
    return VirdimBound(raw_out, min(below, -2))


class OniCase(NamedTuple):
    epsilon: int
    winding_gamma: int
    satisfies_as2: bool
    excluded: bool


def oni_index_equations(epsilon: int, winding_gamma: int) -> tuple[int, int]:
    """Index gaps ``(mu(c_-) - mu(P gamma), mu(P gamma) - mu(c_+))`` for a broken oni."""
    return 1 + epsilon - 2 * winding_gamma, 1 - epsilon + 2 * winding_gamma


def _gap_ok(gap: int, constant: bool) -> bool:
    # For regular J a nonconstant projected piece strictly drops the index.
    return gap == 0 if constant else gap >= 1


def oni_case_analysis(pw1_constant: bool, pw2_constant: bool) -> OniCase:
    """Classify a two-piece breaking of an oni of index gap two by which projected piece is constant.

    The case is found by solving the two index equations over ``epsilon in {0, 1}``
    and small windings rather than by table lookup.
    """
    if pw1_constant and pw2_constant:
        raise BothConstant("both projected pieces constant")
    solutions = []
    for eps in (0, 1):
        for wg in range(-3, 4):
            gap1, gap2 = oni_index_equations(eps, wg)
            if gap1 + gap2 != 2:
                continue
            if not (_gap_ok(gap1, pw1_constant) and _gap_ok(gap2, pw2_constant)):
                continue
            solutions.append((eps, wg))
    if len(solutions) != 1:
        raise AssertionError(f"index equations do not single out a case: {solutions}")
    eps, wg = solutions[0]
    as2 = wg != 0
    # Constant second projection with zero winding puts gamma on the circle of
    # the lifted endpoint; the second piece then has no action drop and is constant.
    excluded = bool(pw2_constant and not as2)
    return OniCase(eps, wg, as2, excluded)


def broken_piece_virdim(mu_minus: int, w_minus: int, mu_plus: int, w_plus: int) -> int:
    return cz_shift(mu_minus, w_minus) - cz_shift(mu_plus, w_plus) - 1


def formula_report(name: str, inputs: dict, value, equation: str) -> dict:
    return {"formula": name, "inputs": inputs, "value": value, "paper_eq": equation}
