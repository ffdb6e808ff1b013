"""``mcgeo`` command line front end.

Chains are JSON documents ``{"factors": [..], "P": [[..]], "pi": [..]}``
where ``P`` may be nested or flat and ``pi`` is optional.  Coordinates and
states on the command line are 1-based.  Output is JSON on stdout with floats
written to 17 significant digits and infinities as the string ``"inf"``.
Exit codes: 0 success, 1 domain error (JSON ``{"error", "detail"}`` on
stdout), 2 argument error (usage on stderr).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .divergences import DivergenceGenerator, f_div_chains
from .errors import McgeoError
from .factorization import (
    CliqueCover,
    Partition,
    clique_candidate,
    clique_pythagorean_check,
    independence_decomposition,
    partition_projection,
)
from .inequalities import (
    SubsetCoverSpec,
    modularity_scan,
    partition_lemma_check,
    sanov_rate,
    shearer_chain_check,
    shearer_independence_check,
)
from .projections import closest_product_kl, coordinate_descent, keep_in
from .spectral import (
    hitting_analysis,
    l2_mixing_time,
    spectral_report,
)
from .state import (
    Distribution,
    ProductStateSpace,
    StochasticMatrix,
    stationary_distribution,
    stationarity_residual,
    reversibility_residual,
)
from .swapping import (
    GibbsLadder,
    SwapConfig,
    build_swapping_matrix,
    gamma_escape,
    restriction_chain,
    restriction_formula,
    simulate_projection_sampler,
    speedup_report,
    total_variation,
)


class InputError(McgeoError):
    kind = "input"


# --- serialization ---------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj) -> str:
    """JSON with 17 significant digits per float and deterministic key order."""
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _parse_number(v):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    return v


def loads(text: str):
    return json.loads(text, object_hook=lambda d: {k: _parse_number(v) for k, v in d.items()})


def _table(obj, prefix="") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            lines.extend(_table(v, f"{prefix}{k}."))
    else:
        lines.append(f"{prefix.rstrip('.')}\t{dumps(obj)}")
    return lines


# --- input -----------------------------------------------------------------

def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _space(doc: dict, n: int, path: str) -> ProductStateSpace:
    factors = doc.get("factors")
    if factors is None:
        return ProductStateSpace((n,))
    if not isinstance(factors, list) or not factors or not all(isinstance(k, int) and k > 0 for k in factors):
        raise InputError(f"{path}: 'factors' must be a non-empty list of positive integers")
    space = ProductStateSpace(tuple(factors))
    if space.total != n:
        raise InputError(f"{path}: factors {factors} give {space.total} states but the data has {n}")
    return space


def load_chain(path: str) -> tuple[StochasticMatrix, Distribution | None]:
    doc = _read_json(path)
    if isinstance(doc, list):
        doc = {"P": doc}
    if not isinstance(doc, dict) or "P" not in doc:
        raise InputError(f"{path}: expected an object with key 'P'")
    a = np.asarray(doc["P"], dtype=float)
    if a.ndim == 1:
        n = math.isqrt(a.size)
        if n * n != a.size:
            raise InputError(f"{path}: flat 'P' of length {a.size} is not square")
        a = a.reshape(n, n)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"{path}: 'P' must be a square matrix")
    space = _space(doc, a.shape[0], path)
    p = StochasticMatrix(space, a)
    pi = None
    if doc.get("pi") is not None:
        pi = Distribution(space, np.asarray(doc["pi"], dtype=float))
    return p, pi


def load_distribution(path: str, space: ProductStateSpace | None = None) -> Distribution:
    doc = _read_json(path)
    mass = doc.get("pi") if isinstance(doc, dict) else doc
    if mass is None:
        raise InputError(f"{path}: expected a list or an object with key 'pi'")
    mass = np.asarray(mass, dtype=float)
    if isinstance(doc, dict) and "factors" in doc:
        sp = _space(doc, mass.size, path)
    else:
        sp = space if space is not None else ProductStateSpace((mass.size,))
    return Distribution(sp, mass)


def load_matrix_list(path: str) -> list[StochasticMatrix]:
    doc = _read_json(path)
    if isinstance(doc, dict):
        doc = doc.get("factors_P", doc.get("matrices"))
    if not isinstance(doc, list) or not doc:
        raise InputError(f"{path}: expected a non-empty list of matrices")
    out = []
    for k, m in enumerate(doc):
        a = np.asarray(m, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InputError(f"{path}: entry {k + 1} is not a square matrix")
        out.append(StochasticMatrix(ProductStateSpace((a.shape[0],)), a))
    return out


def _coords(text: str, d: int) -> tuple[int, ...]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad coordinate list {text!r}") from exc
    if not vals or any(not 1 <= v <= d for v in vals):
        raise InputError(f"coordinates {text!r} must lie in 1..{d}")
    return tuple(v - 1 for v in vals)


def _blocks(text: str, d: int) -> list[tuple[int, ...]]:
    return [_coords(b, d) for b in text.split(";") if b.strip()]


def _chain_and_pi(args) -> tuple[StochasticMatrix, Distribution]:
    p, pi = load_chain(args.p)
    if getattr(args, "pi", None):
        pi = load_distribution(args.pi, p.space)
    if pi is None:
        pi = stationary_distribution(p)
    elif pi.space.total != p.n:
        raise InputError("pi and P have different numbers of states")
    elif pi.space != p.space:
        pi = Distribution(p.space, pi.mass)
    return p, pi


def _generator(args) -> DivergenceGenerator:
    return DivergenceGenerator.by_name(args.f, args.alpha)


# --- commands ----------------------------------------------------------------

def cmd_divergence(args):
    m, pi_m = load_chain(args.m)
    l, _ = load_chain(args.l)
    if l.space != m.space:
        l = StochasticMatrix(m.space, l.rows)
    pi = load_distribution(args.pi, m.space) if args.pi else (pi_m or stationary_distribution(m))
    if pi.space != m.space:
        pi = Distribution(m.space, pi.mass)
    return {"value": f_div_chains(pi, m, l, _generator(args))}


def cmd_project(args):
    p, pi = _chain_and_pi(args)
    f = _generator(args)
    if f.kind == "KL":
        res = closest_product_kl(p, pi)
        return {"divergence": "KL", "distance_to_independence": res.divergence_to_input,
                "unique": res.unique, "factors": [m.rows for m in res.factors]}
    res = coordinate_descent(p, pi, f, max_iters=args.max_iters, tol=args.tol)
    return {"divergence": f.kind, "distance_to_independence": res.trace[-1],
            "sweeps": (len(res.trace) - 1) // p.space.d, "trace": res.trace,
            "factors": [m.rows for m in res.factors]}


def cmd_marginal(args):
    p, pi = _chain_and_pi(args)
    s = _coords(args.coords, p.space.d)
    if args.leave_out:
        s = tuple(i for i in range(p.space.d) if i not in s)
        if not s:
            raise InputError("leaving out every coordinate leaves nothing")
    m = keep_in(p, pi, s)
    return {"coords": [i + 1 for i in s], "factors": list(m.space.factor_sizes), "P": m.rows,
            "pi": pi.marginal(s).mass}


def cmd_factor(args):
    p, pi = _chain_and_pi(args)
    part = Partition(p.space.d, tuple(_blocks(args.blocks, p.space.d)))
    proj = partition_projection(p, pi, part)
    dec = independence_decomposition(p, pi, part)
    return {"blocks": [[i + 1 for i in b] for b in part.blocks],
            "distance_to_factorizability": proj.divergence_to_input,
            "distance_to_independence": dec.total, "block_independence": list(dec.per_block),
            "decomposition_residual": dec.residual, "factors": [m.rows for m in proj.factors]}


def cmd_clique(args):
    p, pi = _chain_and_pi(args)
    cover = CliqueCover.from_cliques(p.space.d, _blocks(args.cliques, p.space.d))
    cand = clique_candidate(p, pi, cover)
    out = {"cliques": [[i + 1 for i in c] for c in cover.cliques],
           "normalizers": cand.normalizers, "P": cand.matrix.rows}
    if args.candidates:
        blocks = load_matrix_list(args.candidates)
        rep = clique_pythagorean_check(p, pi, cover, blocks)
        out["check"] = {"lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack,
                        "normalizer_condition": rep.asserted, "normalizer_term": rep.normalizer_term,
                        "holds": rep.holds}
    return out


def _report(rep):
    return {"lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack, "holds": rep.holds, "premise": rep.premise}


def cmd_check(args):
    p, pi = _chain_and_pi(args)
    d = p.space.d
    kind = args.kind
    if kind == "partition":
        if not args.l or not args.coords:
            raise InputError("check partition needs --l and --coords")
        l, _ = load_chain(args.l)
        return _report(partition_lemma_check(pi, p, StochasticMatrix(p.space, l.rows), _coords(args.coords, d)))
    if kind in ("shearer", "shearer-ind"):
        if not args.cover:
            raise InputError(f"check {kind} needs --cover")
        cover = SubsetCoverSpec.with_max_r(d, _blocks(args.cover, d))
    else:
        cover = SubsetCoverSpec.han(d)
    if kind == "shearer-ind":
        return dict(_report(shearer_independence_check(pi, p, cover)), r=cover.r)
    if not args.factors:
        raise InputError(f"check {kind} needs --factors")
    factors = load_matrix_list(args.factors)
    return dict(_report(shearer_chain_check(pi, p, factors, cover)), r=cover.r)


def cmd_scan(args):
    p, pi = _chain_and_pi(args)
    rep = modularity_scan(p, args.functional, pi)
    return {"functional": rep.functional, "triples": rep.triples,
            "min_modularity_slack": rep.min_modularity_slack,
            "min_monotonicity_slack": rep.min_monotonicity_slack, "holds": rep.holds}


def cmd_sanov(args):
    p, pi = _chain_and_pi(args)
    i = _coords(str(args.coord), p.space.d)[0]
    others = load_matrix_list(args.others)
    return {"coord": i + 1, "rate": sanov_rate(p, pi, i, others)}


def cmd_spectral(args):
    p, pi = _chain_and_pi(args)
    rep = spectral_report(p, pi, cheeger=args.cheeger, restarts=args.restarts, seed=args.seed)
    out = {"gamma": rep.gamma, "t_rel": rep.t_rel, "alpha_lower": rep.alpha_lower,
           "alpha_numeric": rep.alpha_numeric, "alpha_upper": rep.alpha_upper}
    if args.cheeger:
        out["cheeger"] = rep.cheeger
    if args.hitting:
        h = hitting_analysis(p, pi, seed=args.seed)
        out["hitting"] = {"hit": h.hit, "commute": h.commute, "t_c": h.t_c, "t_av": h.t_av,
                          "variational_ok": h.variational_ok}
    return out


def cmd_mix(args):
    p, pi = _chain_and_pi(args)
    return {"eps": args.eps, "t_mix": l2_mixing_time(p, pi, args.eps)}


def _swap_config(args) -> SwapConfig:
    betas = [float(b) for b in args.betas.split(",")]
    if args.d is not None and args.d != len(betas):
        raise InputError(f"--d {args.d} disagrees with {len(betas)} betas")
    if args.hamiltonian:
        doc = _read_json(args.hamiltonian)
        h = np.asarray(doc["H"] if isinstance(doc, dict) else doc, dtype=float)
    else:
        h = np.zeros(2 ** args.N)
    if h.size != 2 ** args.N:
        raise InputError(f"hamiltonian has {h.size} entries, expected 2^{args.N} = {2 ** args.N}")
    return SwapConfig.hypercube(args.N, h, betas)


def cmd_swap(args):
    cfg = _swap_config(args)
    if args.action == "build":
        p_sw = build_swapping_matrix(cfg)
        pi = GibbsLadder.of(cfg).joint()
        fixed = [0] * (cfg.d - 1)
        r = restriction_chain(cfg, fixed, p_sw)
        out = {"states": p_sw.n, "stationarity_residual": stationarity_residual(p_sw, pi),
               "reversibility_residual": reversibility_residual(p_sw, pi),
               "Gamma": gamma_escape(cfg, p_sw),
               "restriction_residual": float(np.abs(r.rows - restriction_formula(cfg).rows).max())}
        if args.matrix:
            out["P"] = p_sw.rows
        return out
    if args.action == "compare":
        rep = speedup_report(cfg, restarts=args.restarts, seed=args.seed if args.seed is not None else 0)
        return {"values": rep.values, "stated_claims": rep.stated_claims, "theorems": rep.theorems,
                "recorded": rep.recorded}
    if args.seed is None:
        raise InputError("swap sample needs an explicit --seed")
    if args.steps < 1:
        raise InputError("--steps must be at least 1")
    coord = {"last": -1, "first": 0}.get(args.coordinate)
    if coord is None:
        coord = _coords(args.coordinate, cfg.d)[0]
    run = simulate_projection_sampler(cfg, args.seed, args.steps, coord)
    exact = GibbsLadder.of(cfg).dists[run.coordinate]
    return {"seed": args.seed, "steps": args.steps, "coordinate": run.coordinate + 1,
            "empirical": run.empirical.mass, "exact": exact.mass,
            "tv": total_variation(run.empirical, exact)}


# --- parser ------------------------------------------------------------------

def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return v
    return conv


def _add_chain(sp, pi=True):
    sp.add_argument("--p", required=True, help="chain JSON file")
    if pi:
        sp.add_argument("--pi", help="distribution JSON file (default: from the chain file or stationary)")


def _add_f(sp):
    sp.add_argument("--f", default="kl", choices=["kl", "rkl", "alpha", "hellinger"])
    sp.add_argument("--alpha", type=_positive(float))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcgeo", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mcgeo {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=["json", "table"], default="json")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    sp = add("divergence", help="f-divergence between two chains")
    _add_f(sp)
    sp.add_argument("--pi")
    sp.add_argument("--m", required=True)
    sp.add_argument("--l", required=True)
    sp.set_defaults(func=cmd_divergence)

    sp = add("project", help="closest product chain")
    _add_chain(sp)
    _add_f(sp)
    sp.add_argument("--max-iters", type=_positive(int), default=500)
    sp.add_argument("--tol", type=_positive(float), default=1e-10)
    sp.set_defaults(func=cmd_project)

    sp = add("marginal", help="keep-S-in or leave-S-out chain")
    _add_chain(sp)
    sp.add_argument("--coords", required=True, help="comma-separated 1-based coordinates")
    sp.add_argument("--leave-out", action="store_true")
    sp.set_defaults(func=cmd_marginal)

    sp = add("factor", help="partition-factorizable projection")
    _add_chain(sp)
    sp.add_argument("--blocks", required=True, help="blocks separated by ';', e.g. '1,2;3'")
    sp.set_defaults(func=cmd_factor)

    sp = add("clique", help="clique-factorized candidate and Pythagorean check")
    _add_chain(sp)
    sp.add_argument("--cliques", required=True)
    sp.add_argument("--candidates", help="JSON list of per-clique matrices")
    sp.set_defaults(func=cmd_clique)

    sp = add("check", help="partition lemma and Han/Shearer inequalities")
    sp.add_argument("kind", choices=["partition", "shearer", "han", "shearer-ind"])
    _add_chain(sp)
    sp.add_argument("--l", help="candidate chain (partition)")
    sp.add_argument("--coords", help="subset S (partition)")
    sp.add_argument("--factors", help="JSON list of per-coordinate matrices (shearer, han)")
    sp.add_argument("--cover", help="subsets separated by ';' (shearer, shearer-ind)")
    sp.set_defaults(func=cmd_check)

    sp = add("scan", help="exhaustive sub/supermodularity scan")
    _add_chain(sp)
    sp.add_argument("--functional", required=True, choices=["entropy", "fact", "ind"])
    sp.set_defaults(func=cmd_scan)

    sp = add("sanov", help="reverse-KL rate exponent")
    _add_chain(sp)
    sp.add_argument("--coord", required=True, type=int)
    sp.add_argument("--others", required=True, help="JSON list of the fixed factor matrices")
    sp.set_defaults(func=cmd_sanov)

    sp = add("spectral", help="spectral gap, log-Sobolev bracket, Cheeger, hitting times")
    _add_chain(sp)
    sp.add_argument("--cheeger", action="store_true")
    sp.add_argument("--hitting", action="store_true")
    sp.add_argument("--restarts", type=_positive(int), default=32)
    sp.add_argument("--seed", type=int, default=0, help="seed of the log-Sobolev restarts")
    sp.set_defaults(func=cmd_spectral)

    sp = add("mix", help="L2 mixing time of the continuized chain")
    _add_chain(sp)
    sp.add_argument("--eps", type=_positive(float), default=math.exp(-1))
    sp.set_defaults(func=cmd_mix)

    sp = add("swap", help="swapping chain on the hypercube")
    sp.add_argument("action", choices=["build", "compare", "sample"])
    sp.add_argument("--N", type=_positive(int), required=True)
    sp.add_argument("--d", type=_positive(int))
    sp.add_argument("--betas", required=True, help="comma-separated increasing inverse temperatures")
    sp.add_argument("--hamiltonian", help="JSON vector of 2^N energies (default: zero)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--steps", type=int, default=100000)
    sp.add_argument("--coordinate", default="last", help="'first', 'last' or a 1-based level")
    sp.add_argument("--restarts", type=_positive(int), default=32)
    sp.add_argument("--matrix", action="store_true", help="include the full matrix (build)")
    sp.set_defaults(func=cmd_swap)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "f", None) == "alpha" and args.alpha is None:
        parser.error("--f alpha needs --alpha")
    try:
        result = args.func(args)
    except (McgeoError, ValueError, IndexError) as exc:
        kind = getattr(exc, "kind", "invalid")
        print(dumps({"error": kind, "detail": str(exc)}))
        return 1
    if args.output == "table":
        print("\n".join(_table(result)))
    else:
        print(dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
