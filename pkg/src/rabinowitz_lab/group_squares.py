"""Permutation groups, the subgroup generated by squares, and square-product decompositions.

Permutations are tuples in one-line form; ``compose(p, q)`` applies ``q``
first, so ``compose(p, q)[i] == p[q[i]]``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

GroupElement = tuple[int, ...]

SIZE_GUARD = 10**6
DEFAULT_MAX_FACTORS = 6


class GroupError(ValueError):
    pass


class SizeGuard(GroupError):
    pass


class NotASubgroup(GroupError):
    pass


class NotInGroup(GroupError):
    pass


class SearchExhausted(RuntimeError):
    pass


def identity(degree: int) -> GroupElement:
    return tuple(range(degree))


def compose(p: GroupElement, q: GroupElement) -> GroupElement:
    return tuple(p[i] for i in q)


def invert(p: GroupElement) -> GroupElement:
    out = [0] * len(p)
    for i in range(len(p)):
        out[p[i]] = i
    return tuple(out)


def square(p: GroupElement) -> GroupElement:
    return compose(p, p)


def _check_perm(p: Sequence[int], degree: int) -> GroupElement:
    p = tuple(int(x) for x in p)
    if len(p) != degree or sorted(p) != list(range(degree)):
        raise GroupError(f"{p} is not a permutation of 0..{degree - 1}")
    return p


def parse_cycles(text: str, degree: int) -> GroupElement:
    """Permutation from cycle notation such as ``"(0 1 2)(3 4)"``; cycles compose right to left."""
    text = text.strip()
    perm = identity(degree)
    if text in ("", "()", "e", "id"):
        return perm
    cycles = re.findall(r"\(([^()]*)\)", text)
    if not cycles or re.sub(r"\([^()]*\)", "", text).strip():
        raise GroupError(f"cannot parse cycle notation {text!r}")
    for body in reversed(cycles):
        pts = [int(x) for x in re.split(r"[\s,]+", body.strip()) if x]
        if len(set(pts)) != len(pts) or any(not 0 <= x < degree for x in pts):
            raise GroupError(f"bad cycle ({body}) for degree {degree}")
        cyc = list(range(degree))
        for a, b in zip(pts, pts[1:] + pts[:1]):
            cyc[a] = b
        perm = compose(tuple(cyc), perm)
    return perm


def format_cycles(p: GroupElement) -> str:
    seen = set()
    parts = []
    for start in range(len(p)):
        if start in seen or p[start] == start:
            continue
        cyc = [start]
        seen.add(start)
        j = p[start]
        while j != start:
            cyc.append(j)
            seen.add(j)
            j = p[j]
        parts.append("(" + " ".join(map(str, cyc)) + ")")
    return "".join(parts) or "()"


def order(p: GroupElement) -> int:
    e = identity(len(p))
    q, n = p, 1
    while q != e:
        q = compose(p, q)
        n += 1
    return n


@dataclass(frozen=True)
class FiniteGroup:
    degree: int
    generators: tuple[GroupElement, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise GroupError("negative degree")
        gens = tuple(_check_perm(g, self.degree) for g in self.generators)
        object.__setattr__(self, "generators", gens)

    def to_json(self) -> dict:
        return {"degree": self.degree, "generators": [list(g) for g in self.generators], "name": self.name}

    @classmethod
    def from_json(cls, data: dict) -> "FiniteGroup":
        degree = int(data["degree"])
        gens = []
        for g in data["generators"]:
            gens.append(parse_cycles(g, degree) if isinstance(g, str) else tuple(g))
        return cls(degree, tuple(gens), str(data.get("name", "")))


def enumerate_group(g: FiniteGroup, guard: int = SIZE_GUARD) -> list[GroupElement]:
    """All elements by breadth-first closure under the generators, in lexicographic order."""
    e = identity(g.degree)
    seen = {e}
    queue = deque([e])
    while queue:
        x = queue.popleft()
        for s in g.generators:
            y = compose(s, x)
            if y not in seen:
                seen.add(y)
                if len(seen) > guard:
                    raise SizeGuard(f"group exceeds {guard} elements")
                queue.append(y)
    return sorted(seen)


def group_order(g: FiniteGroup) -> int:
    return len(enumerate_group(g))


def _generated_by(degree: int, gens: Sequence[GroupElement]) -> set[GroupElement]:
    return set(enumerate_group(FiniteGroup(degree, tuple(gens))))


def squares_subgroup(g: FiniteGroup) -> FiniteGroup:
    """Subgroup generated by all squares, with a small generating set chosen greedily."""
    elems = enumerate_group(g)
    e = identity(g.degree)
    squares = sorted({square(x) for x in elems} - {e})
    gens: list[GroupElement] = []
    span = {e}
    for q in squares:
        if q not in span:
            gens.append(q)
            span = _generated_by(g.degree, gens)
    label = f"{g.name}^2" if g.name else ""
    return FiniteGroup(g.degree, tuple(gens), label)


def is_subgroup(g: FiniteGroup, h: FiniteGroup) -> bool:
    if g.degree != h.degree:
        return False
    elems = set(enumerate_group(g))
    return all(x in elems for x in h.generators)


def is_normal(g: FiniteGroup, h: FiniteGroup) -> bool:
    """Whether ``h`` is closed under conjugation by ``g`` (checked on generators)."""
    if not is_subgroup(g, h):
        raise NotASubgroup("h is not contained in g")
    members = set(enumerate_group(h))
    for x in g.generators:
        x_inv = invert(x)
        for y in h.generators:
            if compose(compose(x, y), x_inv) not in members:
                return False
    return True


def decompose_as_squares(
    g: FiniteGroup, target: Sequence[int], max_factors: int = DEFAULT_MAX_FACTORS
) -> Optional[list[GroupElement]]:
    """Shortest ``[psi_1, ..., psi_n]`` with ``psi_1^2 ... psi_n^2 == target``.

    Breadth-first search over products of squares, so ``n`` is minimal.
    Returns None when ``target`` lies outside the squares subgroup.
    """
    target = _check_perm(target, g.degree)
    elems = enumerate_group(g)
    if target not in set(elems):
        raise NotInGroup(f"{format_cycles(target)} is not in the group")
    e = identity(g.degree)
    roots: dict[GroupElement, GroupElement] = {}
    for x in elems:
        q = square(x)
        if q != e and q not in roots:
            roots[q] = x
    parent: dict[GroupElement, tuple[GroupElement, GroupElement]] = {}
    depth = {e: 0}
    frontier = [e]
    while frontier and target not in depth:
        if depth[frontier[0]] >= max_factors:
            raise SearchExhausted(f"no product of at most {max_factors} squares reaches the target")
        nxt = []
        for x in frontier:
            for q, psi in roots.items():
                y = compose(x, q)
                if y not in depth:
                    depth[y] = depth[x] + 1
                    parent[y] = (x, psi)
                    nxt.append(y)
        frontier = nxt
    if target not in depth:
        return None
    out = []
    y = target
    while y != e:
        y, psi = parent[y]
        out.append(psi)
    return out[::-1]


def multiply_squares(factors: Sequence[GroupElement], degree: int) -> GroupElement:
    acc = identity(degree)
    for psi in factors:
        acc = compose(acc, square(psi))
    return acc


def random_element(g: FiniteGroup, rng: np.random.Generator) -> GroupElement:
    elems = enumerate_group(g)
    return elems[int(rng.integers(len(elems)))]


def cyclic(n: int) -> FiniteGroup:
    return FiniteGroup(n, (tuple((i + 1) % n for i in range(n)),), f"C{n}")


def dihedral(n: int) -> FiniteGroup:
    """Symmetries of the ``n``-gon, order ``2n``."""
    rot = tuple((i + 1) % n for i in range(n))
    ref = tuple((-i) % n for i in range(n))
    return FiniteGroup(n, (rot, ref), f"D{2 * n}")


def symmetric(n: int) -> FiniteGroup:
    if n < 2:
        return FiniteGroup(n, (), f"S{n}")
    return FiniteGroup(n, (parse_cycles("(0 1)", n), tuple((i + 1) % n for i in range(n))), f"S{n}")


def alternating(n: int) -> FiniteGroup:
    gens = tuple(parse_cycles(f"(0 1 {i})", n) for i in range(2, n))
    return FiniteGroup(n, gens, f"A{n}")


def a5() -> FiniteGroup:
    return FiniteGroup(5, (parse_cycles("(0 1 2 3 4)", 5), parse_cycles("(0 1 2)", 5)), "A5")


def quaternion() -> FiniteGroup:
    """Quaternion group in its regular representation on 8 points."""
    # Elements 0..7 are 1, i, j, k, -1, -i, -j, -k.
    table = {
        ("1", "1"): "1", ("1", "i"): "i", ("1", "j"): "j", ("1", "k"): "k",
        ("i", "1"): "i", ("i", "i"): "-1", ("i", "j"): "k", ("i", "k"): "-j",
        ("j", "1"): "j", ("j", "i"): "-k", ("j", "j"): "-1", ("j", "k"): "i",
        ("k", "1"): "k", ("k", "i"): "j", ("k", "j"): "-i", ("k", "k"): "-1",
    }
    names = ["1", "i", "j", "k", "-1", "-i", "-j", "-k"]

    def mul(a: str, b: str) -> str:
        sign = (a.startswith("-")) ^ (b.startswith("-"))
        r = table[(a.lstrip("-"), b.lstrip("-"))]
        if sign:
            r = r[1:] if r.startswith("-") else "-" + r
        return r

    def left(x: str) -> GroupElement:
        return tuple(names.index(mul(x, y)) for y in names)

    return FiniteGroup(8, (left("i"), left("j")), "Q8")


def battery() -> list[FiniteGroup]:
    groups = [cyclic(n) for n in range(1, 13)]
    groups += [dihedral(n) for n in range(3, 7)]
    groups += [symmetric(3), symmetric(4), alternating(4), a5(), quaternion()]
    return groups
