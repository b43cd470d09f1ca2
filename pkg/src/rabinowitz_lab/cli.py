"""Command-line front end.

Exit codes: 0 on success, 2 when an input fails validation, 3 when a
numerical procedure fails (integration blow-up, unresolved spectral gap,
exhausted search).  ``RABINOWITZ_LAB_THREADS`` sets the worker count for
shot sweeps and fuzz shards; results do not depend on it.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import floer_index as fi
from . import gf2_homalg as gf
from . import group_squares as gs
from . import jsonio
from . import linearization as lin
from . import vortex_flow as vf
from .fourier_loop import (
    CriticalPointId,
    RabinowitzPoint,
    action,
    action_gradient,
    critical_point,
    is_critical,
    moment_integral,
    symplectic_area,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
THREADS_ENV = "RABINOWITZ_LAB_THREADS"


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    out: Optional[str] = None


def _threads() -> Optional[int]:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ValidationError(f"{THREADS_ENV} must be >= 1")
    return n


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _band(text: str) -> tuple[int, int]:
    vals = _int_list(text)
    if len(vals) != 2 or vals[0] > vals[1]:
        raise argparse.ArgumentTypeError(f"band must be LO,HI with LO <= HI, got {text!r}")
    return (vals[0], vals[1])


def _dims(text: str) -> tuple[int, int, int]:
    vals = _int_list(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"dims must be V,W,X, got {text!r}")
    return (vals[0], vals[1], vals[2])


def _group_elem(text: str) -> tuple[float, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"group element must be r,k, got {text!r}")
    try:
        return (float(parts[0]), int(parts[1]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"group element must be r,k, got {text!r}") from None


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _cid_json(c: Optional[CriticalPointId]) -> Optional[dict]:
    return None if c is None else {"r": c.r, "k": c.k}


# action ---------------------------------------------------------------------------


def cmd_action_eval(cfg: RunConfig) -> dict:
    p = RabinowitzPoint.from_json(jsonio.read(cfg.params["point"]))
    grad = action_gradient(p)
    return {
        "point": p.to_json(),
        "area": symplectic_area(p.loop),
        "moment": moment_integral(p.loop),
        "action": action(p),
        "gradient_norm": grad.norm(),
        "critical": _cid_json(is_critical(p)),
    }


# vortex ---------------------------------------------------------------------------


def cmd_vortex_flow(cfg: RunConfig) -> str:
    prm = cfg.params
    if prm["explicit"]:
        state = vf.explicit_vortex(prm["s0"])
    elif prm["point"]:
        state = vf.ReducedState.from_point(RabinowitzPoint.from_json(jsonio.read(prm["point"])))
    else:
        raise ValidationError("vortex flow needs --point FILE or --explicit")
    if prm["band"] is not None:
        state = state.widen(*prm["band"])
    traj = vf.integrate(state, prm["s0"], prm["s1"], rtol=prm["rtol"], atol=prm["atol"])
    return traj.to_csv()


def _shoot_kwargs(prm: dict) -> dict:
    kw: dict[str, Any] = {"n_shots": prm["n_shots"], "tol": prm["tol"], "workers": _threads()}
    if prm.get("band") is not None:
        kw["band"] = prm["band"]
    if prm.get("extra_seed"):
        kw["extra_seed"] = prm["extra_seed"]
    return kw


def cmd_vortex_count(cfg: RunConfig) -> dict:
    prm = cfg.params
    return vf.vortex_report(prm["k_minus"], prm["k_plus"], **_shoot_kwargs(prm))


def cmd_vortex_energy(cfg: RunConfig) -> dict:
    prm = cfg.params
    if prm["explicit"]:
        traj = vf.explicit_vortex_trajectory()
        g = prm["shift"]
        if g is not None:
            traj = vf.act_on_trajectory(g, traj)
    else:
        orbits = vf.find_vortex_orbits(prm["k_minus"], prm["k_plus"], **_shoot_kwargs(prm))
        if not orbits:
            raise vf.NotConverged("no connecting orbit found")
        traj = orbits[0]
    e = vf.energy(traj)
    a_neg = action(critical_point(traj.neg_limit))
    a_pos = action(critical_point(traj.pos_limit))
    return {
        "energy": e,
        "action_drop": a_neg - a_pos,
        "neg_limit": _cid_json(traj.neg_limit),
        "pos_limit": _cid_json(traj.pos_limit),
    }


def cmd_vortex_index(cfg: RunConfig) -> dict:
    prm = cfg.params
    grid = lin.WeightedGrid(S=prm["S"], Ns=prm["Ns"], band=prm["band"], delta=prm["delta"], T=prm["T"])
    traj = vf.explicit_vortex_trajectory()
    if prm["shift"] is not None:
        traj = vf.act_on_trajectory(prm["shift"], traj)
    if prm["constant"] is not None:
        r, k = prm["constant"]
        traj = vf.constant_trajectory(CriticalPointId(r, k), (-k, -k))
    return lin.fredholm_report(traj, grid, prm["svd_tol"])


# floer ----------------------------------------------------------------------------


def cmd_floer_dims(cfg: RunConfig) -> dict:
    prm = cfg.params
    mm, mp = prm["mu_minus"], prm["mu_plus"]
    inputs = {"mu_minus": mm, "mu_plus": mp}
    out = {
        "flow": fi.formula_report("flow_moduli_dim", inputs, fi.flow_moduli_dim(mm, mp), "mu(c-) - mu(c+) - 1"),
        "oni": fi.formula_report("oni_moduli_dim", inputs, fi.oni_moduli_dim(mm, mp), "mu(c-) - mu(c+) - 2"),
    }
    if prm["w_minus"] is not None or prm["w_plus"] is not None:
        wm, wp = prm["w_minus"] or 0, prm["w_plus"] or 0
        inputs2 = dict(inputs, w_minus=wm, w_plus=wp)
        out["broken_piece"] = fi.formula_report(
            "broken_piece_virdim",
            inputs2,
            fi.broken_piece_virdim(mm, wm, mp, wp),
            "(mu(c-) - 2 w-) - (mu(c+) - 2 w+) - 1",
        )
    return out


def _geometry(prm: dict) -> fi.GeometryDatum:
    return fi.GeometryDatum(prm["n"], prm["kappa"], prm["nu"], prm.get("omega_v", 1.0), prm.get("c1_tm", 0))


def cmd_floer_nu(cfg: RunConfig) -> dict:
    g = _geometry(cfg.params)
    variant = cfg.params["variant"]
    inputs = {"n": g.n, "kappa": g.kappa, "nu": g.nu, "variant": variant}
    eq = {
        "base": "nu > max(n + kappa - 2, kappa)",
        "homotopy": "nu > max(n + kappa - 1, kappa)",
        "even_h3": "nu even and nu > n + kappa",
    }[variant]
    return fi.formula_report("nu_admissible", inputs, fi.nu_admissible(g, variant), eq)


def cmd_floer_cases(cfg: RunConfig) -> dict:
    prm = cfg.params
    if prm["pw1_constant"] is None and prm["pw2_constant"] is None:
        combos = [(False, False), (True, False), (False, True)]
    else:
        combos = [(bool(prm["pw1_constant"]), bool(prm["pw2_constant"]))]
    rows = []
    for a, b in combos:
        case = fi.oni_case_analysis(a, b)
        rows.append({"pw1_constant": a, "pw2_constant": b, **case._asdict()})
    return fi.formula_report(
        "oni_case_analysis",
        {"cases": [list(c) for c in combos]},
        rows,
        "mu(c-) - mu(P gamma) = 1 + eps - 2 w(gamma); mu(P gamma) - mu(c+) = 1 - eps + 2 w(gamma)",
    )


def cmd_floer_virdim(cfg: RunConfig) -> dict:
    g = _geometry(cfg.params)
    inputs = {"n": g.n, "kappa": g.kappa, "nu": g.nu, "omega_v": g.omega_v}
    res = fi.virdim_bound(g)
    out = fi.formula_report(
        "virdim_bound", inputs, res.to_json(), "virdim < 2n - 4 - 2 max(n - 2, 0) omega(v); even => <= -2"
    )
    out["chern_upper_bound"] = fi.chern_upper_bound(g)
    return out


# gf2 ------------------------------------------------------------------------------


def _load_witness(prm: dict) -> gf.HomotopyWitness:
    if prm.get("witness"):
        return gf.HomotopyWitness.from_json(jsonio.read(prm["witness"]))
    if prm.get("dims") is None:
        raise ValidationError("need --witness FILE or --dims V,W,X (with --seed)")
    return gf.generate_instance(prm["seed"], *prm["dims"])


def cmd_gf2_check(cfg: RunConfig) -> dict:
    w = _load_witness(cfg.params)
    valid = gf.verify_witness(w)
    out: dict[str, Any] = {"dims": [w.dimV, w.dimW, w.dimX], "valid": valid}
    if not valid:
        raise ValidationError("witness identity Psi Phi + G F = id + R d + d R fails")
    out.update(gf.check_bound(w).to_json())
    pairs = gf.kernel_inclusion_check(gf.reduce_to_trivial_X(w))
    out["inclusion_pairs"] = [{"v": list(v), "preimage": list(p)} for v, p in pairs]
    if cfg.params.get("emit_witness"):
        out["witness"] = w.to_json()
    return out


def cmd_gf2_reduce(cfg: RunConfig) -> dict:
    w = _load_witness(cfg.params)
    return gf.reduce_to_trivial_X(w).to_json()


def cmd_gf2_fuzz(cfg: RunConfig) -> dict:
    prm = cfg.params
    rep = gf.fuzz(prm["seed"], prm["count"], dims=prm["dims"], max_dim=prm["max_dim"], workers=_threads())
    out = rep.to_json()
    out["requested"] = prm["count"]
    out["holds_fraction"] = f"{rep.holds}/{rep.generated}"
    return out


def cmd_gf2_fixbound(cfg: RunConfig) -> dict:
    betti = cfg.params["betti"]
    return {"betti": betti, **gf.fix_point_bound(betti).to_json()}


# group ----------------------------------------------------------------------------

NAMED_GROUPS: dict[str, Callable[[], gs.FiniteGroup]] = {
    "A5": gs.a5,
    "A4": lambda: gs.alternating(4),
    "S3": lambda: gs.symmetric(3),
    "S4": lambda: gs.symmetric(4),
    "Q8": gs.quaternion,
}


def _load_group(prm: dict) -> gs.FiniteGroup:
    if prm.get("group_file"):
        return gs.FiniteGroup.from_json(jsonio.read(prm["group_file"]))
    name = prm.get("named")
    if not name:
        raise ValidationError("need --group FILE or --named NAME")
    if name in NAMED_GROUPS:
        return NAMED_GROUPS[name]()
    for prefix, make in (("C", gs.cyclic), ("D", lambda k: gs.dihedral(k // 2))):
        if name.startswith(prefix) and name[1:].isdigit():
            return make(int(name[1:]))
    raise ValidationError(f"unknown group name {name!r}")


def cmd_group_squares(cfg: RunConfig) -> dict:
    g = _load_group(cfg.params)
    h = gs.squares_subgroup(g)
    order_g = gs.group_order(g)
    order_h = gs.group_order(h)
    return {
        "group": g.to_json(),
        "order": order_g,
        "squares_subgroup": h.to_json(),
        "squares_order": order_h,
        "is_normal": gs.is_normal(g, h),
        "equals_group": order_g == order_h,
    }


def cmd_group_decompose(cfg: RunConfig) -> dict:
    prm = cfg.params
    g = _load_group(prm)
    target = gs.parse_cycles(prm["target"], g.degree)
    factors = gs.decompose_as_squares(g, target, prm["max_factors"])
    out: dict[str, Any] = {"target": list(target), "target_cycles": gs.format_cycles(target)}
    if factors is None:
        out.update({"found": False, "factors": None})
    else:
        out.update(
            {
                "found": True,
                "n": len(factors),
                "factors": [list(f) for f in factors],
                "factors_cycles": [gs.format_cycles(f) for f in factors],
            }
        )
    return out


# parser ---------------------------------------------------------------------------


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def _add_shoot(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-minus", type=int, required=False, default=1)
    p.add_argument("--k-plus", type=int, required=False, default=0)
    p.add_argument("--n-shots", type=int, default=64)
    p.add_argument("--tol", type=_positive_float, default=1e-6)
    p.add_argument("--band", type=_band, default=None, help="mode band LO,HI")
    p.add_argument("--extra-seed", type=float, default=0.0, help="offset on modes below -k_minus")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rabinowitz-lab", description=__doc__.splitlines()[0])
    top = parser.add_subparsers(dest="area", required=True)

    act = top.add_parser("action", help="Rabinowitz action functional on Fourier loops")
    act_sub = act.add_subparsers(dest="command", required=True)
    p = act_sub.add_parser(
        "eval",
        help="action A = -sum pi m |a_m|^2 - eta pi (sum |a_m|^2 - 1) and its gradient",
        description="Evaluates the Rabinowitz action A = -area - eta * int mu(u) dt of a loop JSON file.",
    )
    p.add_argument("--point", required=True, help="loop JSON {band_lo, band_hi, coeffs, eta}")
    _add_out(p)
    p.set_defaults(handler=cmd_action_eval)

    vor = top.add_parser("vortex", help="vortex equations in Fourier modes")
    vsub = vor.add_subparsers(dest="command", required=True)
    p = vsub.add_parser(
        "flow",
        help="integrate d/ds a_m = 2 pi (m + eta) a_m, d/ds eta = pi (sum |a_m|^2 - 1)",
        description="Integrates the mode form of the vortex equations and writes a CSV trajectory.",
    )
    p.add_argument("--point", default=None, help="initial loop JSON")
    p.add_argument("--explicit", action="store_true", help="start from the closed-form vortex at s0")
    p.add_argument("--s0", type=float, default=-1.0)
    p.add_argument("--s1", type=float, default=1.0)
    p.add_argument("--rtol", type=_positive_float, default=vf.DEFAULT_RTOL)
    p.add_argument("--atol", type=_positive_float, default=vf.DEFAULT_ATOL)
    p.add_argument("--band", type=_band, default=None)
    _add_out(p)
    p.set_defaults(handler=cmd_vortex_flow)

    p = vsub.add_parser(
        "count",
        help="mod-2 vortex number: count of unparametrized vortices between adjacent critical circles",
        description="Counts vortices from crit(k_minus) to crit(k_plus) by unstable-manifold shooting.",
    )
    _add_shoot(p)
    _add_out(p)
    p.set_defaults(handler=cmd_vortex_count)

    p = vsub.add_parser(
        "energy",
        help="energy E = int |d_s u|^2 + |d_s eta|^2 ds against the action drop",
        description="Energy of a vortex, compared with the action drop pi k_minus - pi k_plus.",
    )
    _add_shoot(p)
    p.add_argument("--explicit", action="store_true", help="use the closed-form vortex")
    p.add_argument("--shift", type=_group_elem, default=None, help="group element r,k applied to the closed form")
    _add_out(p)
    p.set_defaults(handler=cmd_vortex_energy)

    p = vsub.add_parser(
        "index",
        help="Fredholm index of the linearized vortex operator D on weighted spaces",
        description="dim ker D - dim ker D* for the closed-form vortex (or a constant solution).",
    )
    p.add_argument("--S", type=_positive_float, default=8.0)
    p.add_argument("--Ns", type=int, default=400)
    p.add_argument("--band", type=_band, default=(-3, 2))
    p.add_argument("--delta", type=_positive_float, default=math.pi)
    p.add_argument("--T", type=_positive_float, default=1.0)
    p.add_argument("--svd-tol", type=_positive_float, default=lin.DEFAULT_SVD_TOL)
    p.add_argument("--shift", type=_group_elem, default=None)
    p.add_argument("--constant", type=_group_elem, default=None, help="use the constant solution at crit(r,k)")
    _add_out(p)
    p.set_defaults(handler=cmd_vortex_index)

    flo = top.add_parser("floer", help="index and dimension bookkeeping")
    fsub = flo.add_subparsers(dest="command", required=True)
    p = fsub.add_parser(
        "dims",
        help="moduli dimensions mu(c-) - mu(c+) - 1 (flow lines) and - 2 (onis); index shift mu - 2w",
    )
    p.add_argument("--mu-minus", type=int, required=True)
    p.add_argument("--mu-plus", type=int, required=True)
    p.add_argument("--w-minus", type=int, default=None)
    p.add_argument("--w-plus", type=int, default=None)
    _add_out(p)
    p.set_defaults(handler=cmd_floer_dims)

    p = fsub.add_parser("nu", help="twist admissibility nu > max(n + kappa - 2, kappa) and its variants")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--variant", choices=fi.VARIANTS, default="base")
    _add_out(p)
    p.set_defaults(handler=cmd_floer_nu)

    p = fsub.add_parser("cases", help="oni breaking cases from the two index-gap equations with eps in {0,1}")
    p.add_argument("--pw1-constant", type=int, choices=(0, 1), default=None)
    p.add_argument("--pw2-constant", type=int, choices=(0, 1), default=None)
    _add_out(p)
    p.set_defaults(handler=cmd_floer_cases)

    p = fsub.add_parser(
        "virdim",
        help="sphere dimension bound 2n - 4 - 2 max(n - 2, 0) omega(v) from the Chern bound (kappa - nu) omega(v)",
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--omega-v", type=float, default=1.0)
    _add_out(p)
    p.set_defaults(handler=cmd_floer_virdim)

    gfp = top.add_parser("gf2", help="homotopy witnesses over GF(2)")
    gsub = gfp.add_subparsers(dest="command", required=True)
    for name, handler, text in (
        ("check", cmd_gf2_check, "check Psi Phi + G F = id + R d + d R and dim H(V, d) <= dim W + dim X"),
        ("reduce", cmd_gf2_reduce, "absorb X into W: Phi~ = (Phi, F), Psi~ = Psi + G"),
    ):
        p = gsub.add_parser(name, help=text)
        p.add_argument("--witness", default=None, help="witness JSON")
        p.add_argument("--dims", type=_dims, default=None, help="generate a witness with dims V,W,X")
        p.add_argument("--seed", type=int, default=0)
        if name == "check":
            p.add_argument("--emit-witness", action="store_true")
        _add_out(p)
        p.set_defaults(handler=handler)

    p = gsub.add_parser("fuzz", help="fuzz the bound dim H(V, d) <= dim W + dim X on generated witnesses")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--dims", type=_dims, default=None)
    p.add_argument("--max-dim", type=int, default=12)
    _add_out(p)
    p.set_defaults(handler=cmd_gf2_fuzz)

    p = gsub.add_parser("fixbound", help="fixed-point lower bound (1/5) sum_k b_k over mod-2 Betti numbers")
    p.add_argument("--betti", type=_int_list, required=True, help="comma-separated Betti numbers")
    _add_out(p)
    p.set_defaults(handler=cmd_gf2_fixbound)

    grp = top.add_parser("group", help="squares subgroup of finite permutation groups")
    gpsub = grp.add_subparsers(dest="command", required=True)
    for name, handler, text in (
        ("squares", cmd_group_squares, "subgroup G^2 = <g^2 : g in G> and its normality"),
        ("decompose", cmd_group_decompose, "write phi = psi_1^2 ... psi_n^2 with n minimal"),
    ):
        p = gpsub.add_parser(name, help=text)
        p.add_argument("--group", dest="group_file", default=None, help='group JSON {"degree", "generators", "name"}')
        p.add_argument("--named", default=None, help="A5, A4, S3, S4, Q8, Cn or D2n")
        if name == "decompose":
            p.add_argument("--target", required=True, help='cycle notation, e.g. "(0 1 2 3 4)"')
            p.add_argument("--max-factors", type=int, default=gs.DEFAULT_MAX_FACTORS)
        _add_out(p)
        p.set_defaults(handler=handler)
    return parser


_NUMERICAL = (
    vf.VortexFlowError,
    lin.LinearizationError,
    gf.GenerationExhausted,
    gf.InclusionFailure,
    gs.SearchExhausted,
    np.linalg.LinAlgError,
)
_VALIDATION = (ValueError, OSError, KeyError, TypeError)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_VALIDATION
    params = {k: v for k, v in vars(args).items() if k not in ("handler", "area", "command", "out")}
    cfg = RunConfig(f"{args.area} {args.command}", params, params.get("seed"), args.out)
    try:
        result = args.handler(cfg)
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _VALIDATION as exc:
        print(f"invalid input: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if isinstance(result, str):
        if cfg.out is None or cfg.out == "-":
            sys.stdout.write(result)
        else:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(result)
    else:
        jsonio.write(result, cfg.out)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
