"""Batch command-line front end.

Every subcommand prints a single stable summary line on stdout and, with
--out, writes a JSON artifact whose only run-dependent field is "timestamp".
Exit codes: 0 success/verified, 2 invalid input, 3 budget exhausted,
4 internal consistency failure, 64 usage errors.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from fractions import Fraction

from . import eppa as eppa_mod
from . import globalization as glob_mod
from . import katetov as kat_mod
from . import probes as probe_mod
from .spaces import ConsistencyError, FiniteMetricSpace, SpaceError
from .util import default_workers

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BUDGET = 3
EXIT_INTERNAL = 4
EXIT_USAGE = 64


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


def _load_space(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    space = FiniteMetricSpace.from_json(data)
    report = space.validate()
    if not report:
        raise SpaceError(report.render())
    return space


def _write_artifact(args, command, result, seed=None):
    if not getattr(args, "out", None):
        return
    artifact = {
        "command": command,
        "seed": seed,
        "timestamp": time.time(),
        "result": result,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(artifact, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _seed_of(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    seed = random.SystemRandom().randrange(2 ** 31)
    print(f"seed generated: {seed}", file=sys.stderr)
    return seed


def _budget(args, seed):
    return eppa_mod.SearchBudget(
        max_omega=args.max_omega, max_attempts=args.max_attempts,
        rng_seed=seed, time_limit_s=args.time_limit)


# --------------------------------------------------------------------------
# Subcommand handlers
# --------------------------------------------------------------------------

def cmd_validate(args):
    with open(args.space, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    space = FiniteMetricSpace.from_json(data)
    report = space.validate()
    _write_artifact(args, "validate", {
        "name": space.name, "valid": report.ok,
        "violations": [str(v) for v in report.violations]})
    if report.ok:
        print(f"validate name={space.name or '?'} points={space.size} valid=yes")
        return EXIT_OK
    print(report.render(), file=sys.stderr)
    print(f"validate name={space.name or '?'} points={space.size} valid=no")
    return EXIT_INVALID


def cmd_enumerate_katetov(args):
    space = _load_space(args.space)
    funcs = kat_mod.enumerate_katetov(space, space.value_set, args.bound)
    _write_artifact(args, "enumerate-katetov", {
        "space": space.name, "bound": args.bound,
        "functions": [list(f.values) for f in funcs]})
    print(f"enumerate-katetov space={space.name or '?'} bound={args.bound} "
          f"count={len(funcs)}")
    return EXIT_OK


def cmd_grow(args):
    space = _load_space(args.space)
    seed = _seed_of(args)
    result = kat_mod.grow_fragment(space, space.value_set, args.steps, seed,
                                   strategy=args.strategy, bound=args.bound)
    _write_artifact(args, "grow", {
        "space": result.space.to_json(), "steps_done": result.steps_done,
        "notice": result.notice}, seed=seed)
    print(f"grow seed={seed} steps={result.steps_done}/{args.steps} "
          f"points={result.space.size} notice={result.notice or 'none'}")
    return EXIT_OK


def cmd_sphere_witness(args):
    witness = kat_mod.build_sphere_witness(args.m, args.k, args.n,
                                           workers=args.workers)
    result = witness.to_json()
    summary = (f"sphere-witness m={args.m} k={args.k} N={args.n} "
               f"functions={len(witness.family)} small_k={witness.small_k_flag}")
    if args.realize:
        realized, where = kat_mod.realize_T_epsilon(witness)
        result["realized"] = realized.to_json()
        result["witness_points"] = dict(sorted(where.items()))
        result["witness_distance_convention"] = \
            "controlled extension over the fragment, lexicographic eps order"
        summary += f" realized_points={realized.size}"
    _write_artifact(args, "sphere-witness", result)
    print(summary)
    return EXIT_OK


def cmd_eppa_search(args):
    space = _load_space(args.space)
    seed = _seed_of(args)
    witness = eppa_mod.search_witness_quotient(space, _budget(args, seed))
    if witness is None:
        stats = eppa_mod.search_witness_quotient.last_stats
        _write_artifact(args, "eppa-search", {"found": False, "stats": stats},
                        seed=seed)
        print(f"eppa-search space={space.name or '?'} found=no "
              f"attempts={stats.get('attempts')}")
        return EXIT_BUDGET
    _write_artifact(args, "eppa-search", witness.to_json(), seed=seed)
    if args.verbose:
        print(f"stats: {json.dumps(witness.stats, sort_keys=True)}",
              file=sys.stderr)
    print(f"eppa-search space={space.name or '?'} witness size={witness.size} "
          f"provenance={witness.provenance}")
    return EXIT_OK


def cmd_eppa_verify(args):
    with open(args.witness, "r", encoding="utf-8") as fh:
        witness = eppa_mod.EppaWitness.from_json(json.load(fh))
    report = eppa_mod.verify_witness(witness)
    _write_artifact(args, "eppa-verify", {
        "valid": report.ok, "violations": [str(v) for v in report.violations]})
    print(f"eppa-verify size={witness.size} valid={'yes' if report.ok else 'no'}")
    if not report.ok:
        print(report.render(), file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_eppa_oracle(args):
    space = _load_space(args.space)
    witness = eppa_mod.brute_force_witness(space, args.max_size,
                                           distance_bound=args.bound)
    if witness is None:
        stats = eppa_mod.brute_force_witness.last_stats
        _write_artifact(args, "eppa-oracle", {"found": False, "stats": stats})
        print(f"eppa-oracle space={space.name or '?'} found=no "
              f"examined={stats.get('examined')}")
        return EXIT_BUDGET
    _write_artifact(args, "eppa-oracle", witness.to_json())
    print(f"eppa-oracle space={space.name or '?'} witness size={witness.size}")
    return EXIT_OK


def cmd_eppa_tower(args):
    from .spaces import GroupTooLarge

    space = _load_space(args.space)
    seed = _seed_of(args)
    tower = eppa_mod.build_tower(space, args.levels, _budget(args, seed))
    sizes = [s.size for s in tower.levels]
    orders = []
    for g in tower.groups:
        try:
            orders.append(g.order(cap=100_000))
        except GroupTooLarge:
            orders.append(None)
    _write_artifact(args, "eppa-tower", {
        "sizes": sizes, "group_orders": orders, "complete": tower.complete,
        "witnesses": [w.to_json() for w in tower.witnesses]}, seed=seed)
    print(f"eppa-tower levels={len(tower.witnesses)} sizes={sizes} "
          f"orders={orders} complete={tower.complete}")
    return EXIT_OK if tower.complete else EXIT_BUDGET


def _load_action(args, space):
    with open(args.action, "r", encoding="utf-8") as fh:
        return glob_mod.QuotientAction.from_json(json.load(fh), space)


def cmd_globalize_check(args):
    space = _load_space(args.space)
    action = _load_action(args, space)
    report = glob_mod.check_quotient(space, action)
    _write_artifact(args, "globalize-check", {
        "accepted": report.ok, "violations": [str(v) for v in report.violations]})
    print(f"globalize-check omega={action.omega} "
          f"accepted={'yes' if report.ok else 'no'}")
    if not report.ok:
        print(report.render(), file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_globalize_graph(args):
    space = _load_space(args.space)
    action = _load_action(args, space)
    report = glob_mod.check_quotient(space, action)
    if not report.ok:
        print(report.render(), file=sys.stderr)
        return EXIT_INVALID
    graph = glob_mod.build_coset_graph(action)
    result = {
        "nodes": list(graph.nodes),
        "connected": graph.connected,
        "edges": [[u, v, list(labels)] for (u, v), labels
                  in sorted(graph.edge_labels.items())],
        "path_matrix": [[graph.path_matrix[(u, v)] for v in graph.nodes]
                        for u in graph.nodes],
    }
    _write_artifact(args, "globalize-graph", result)
    print(f"globalize-graph nodes={len(graph.nodes)} "
          f"edges={len(graph.edge_labels)} connected={graph.connected}")
    return EXIT_OK


def cmd_globalize_badconf(args):
    space = _load_space(args.space)
    action = _load_action(args, space)
    graph = glob_mod.build_coset_graph(action)
    cfg = glob_mod.detect_bad_configuration(space, graph, action)
    if cfg is None:
        _write_artifact(args, "globalize-badconf", {"found": False})
        print("globalize-badconf found=no")
        return EXIT_OK
    _write_artifact(args, "globalize-badconf", {
        "found": True, "n": cfg.n, "pairs": [list(p) for p in cfg.pairs],
        "words": [list(w) for w in cfg.words],
        "endpoints": [cfg.endpoint_p, cfg.endpoint_q],
        "total_cost": cfg.total_cost, "required": cfg.required})
    print(f"globalize-badconf found=yes cost={cfg.total_cost} "
          f"required={cfg.required}")
    return EXIT_OK


def cmd_globalize_leftsys(args):
    space = _load_space(args.space)
    with open(args.system, "r", encoding="utf-8") as fh:
        sys_data = json.load(fh)
    alphabet = glob_mod.Alphabet(space)
    actions = []
    for path in args.actions:
        with open(path, "r", encoding="utf-8") as fh:
            actions.append(glob_mod.QuotientAction.from_json(
                json.load(fh), space, alphabet))
    equations = tuple(
        glob_mod.LeftEquation(
            lhs=e["lhs"], index=int(e["index"]),
            rhs_word=glob_mod.reduce_word(tuple(e.get("word", ()))),
            rhs_unknown=e.get("unknown"))
        for e in sys_data["equations"])
    system = glob_mod.LeftSystem(tuple(sys_data["unknowns"]), equations)
    try:
        solution = glob_mod.solve_left_system(system, actions)
    except glob_mod.SearchBudgetExceeded as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BUDGET
    _write_artifact(args, "globalize-leftsys", {
        "solvable": solution is not None,
        "solution": None if solution is None
        else {u: list(w) for u, w in sorted(solution.items())}})
    print(f"globalize-leftsys solvable={'yes' if solution is not None else 'no'}")
    return EXIT_OK


def cmd_average(args):
    with open(args.input, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    space = FiniteMetricSpace.from_json(data["space"])
    report = space.validate()
    if not report:
        raise SpaceError(report.render())
    phi = [[Fraction(c) for c in data["phi"][lbl]] for lbl in space.labels]
    if data.get("group") == "iso":
        from .spaces import compute_isometry_group
        group = compute_isometry_group(space)
    else:
        from .spaces import PermutationGroup
        group = PermutationGroup(space.size,
                                 [tuple(g) for g in data["group"]["gens"]])
    emb = probe_mod.average_map(space, group, phi)
    transform = probe_mod.check_metric_transform(space, emb.sq_distance)
    result = {
        "group_order": len(emb.elements),
        "is_metric_transform": transform.is_transform,
        "table": [[r, str(v)] for r, v in transform.table],
        "sq_distances": [[x, y, str(emb.sq_distance(x, y))]
                         for x in space.points() for y in range(x)],
    }
    _write_artifact(args, "average", result)
    print(f"average group_order={len(emb.elements)} "
          f"transform={'yes' if transform.is_transform else 'no'}")
    return EXIT_OK


def cmd_probe_delta(args):
    table = probe_mod.modulus_convexity(args.p, args.dim, args.eps)
    _write_artifact(args, "probe-delta", {
        "p": args.p, "dim": args.dim, "table": table})
    parts = " ".join(f"delta({e:g})={d:.6f}" for e, d in table)
    print(f"probe-delta p={args.p:g} {parts}")
    return EXIT_OK


def cmd_probe_rho(args):
    table = probe_mod.modulus_smoothness(args.p, args.dim, args.tau)
    _write_artifact(args, "probe-rho", {
        "p": args.p, "dim": args.dim, "table": table})
    parts = " ".join(f"rho({t:g})={r:.6f}" for t, r in table)
    print(f"probe-rho p={args.p:g} {parts}")
    return EXIT_OK


def cmd_probe_tree(args):
    witness = kat_mod.build_sphere_witness(args.m, args.k, args.n,
                                           workers=args.workers)
    realized, where = kat_mod.realize_T_epsilon(witness)
    anchors = tuple(range(witness.fragment.size))
    embedding = probe_mod.distance_vector_embedding(realized, anchors)
    points = {eps: realized.index(lbl) for eps, lbl in where.items()}
    cert = probe_mod.convexity_probe(
        realized, points, embedding, args.n,
        source={"fragment": witness.fragment.name, "embedding": "distance-vector"},
        workers=args.workers)
    _write_artifact(args, "probe-tree", cert.to_json())
    print(f"probe-tree m={args.m} k={args.k} N={args.n} {cert.summary_line()}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_budget_flags(p):
    p.add_argument("--max-omega", type=int, default=64)
    p.add_argument("--max-attempts", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None)


def build_parser():
    parser = _Parser(prog="urysohn-forge")
    parser.add_argument("--workers", type=int, default=default_workers())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("validate")
    p.add_argument("space")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("enumerate-katetov")
    p.add_argument("space")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_enumerate_katetov)

    p = sub.add_parser("grow")
    p.add_argument("space")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--strategy", choices=("uniform", "coverage"),
                   default="uniform")
    p.add_argument("--bound", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_grow)

    p = sub.add_parser("sphere-witness")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--realize", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sphere_witness)

    p = sub.add_parser("eppa")
    esub = p.add_subparsers(dest="eppa_command")
    q = esub.add_parser("search")
    q.add_argument("space")
    _add_budget_flags(q)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_eppa_search)
    q = esub.add_parser("verify")
    q.add_argument("witness")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_eppa_verify)
    q = esub.add_parser("oracle")
    q.add_argument("space")
    q.add_argument("--max-size", type=int, required=True)
    q.add_argument("--bound", type=int, default=None)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_eppa_oracle)
    q = esub.add_parser("tower")
    q.add_argument("space")
    q.add_argument("--levels", type=int, required=True)
    _add_budget_flags(q)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_eppa_tower)

    p = sub.add_parser("globalize")
    gsub = p.add_subparsers(dest="globalize_command")
    q = gsub.add_parser("check")
    q.add_argument("space")
    q.add_argument("action")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_globalize_check)
    q = gsub.add_parser("graph")
    q.add_argument("space")
    q.add_argument("action")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_globalize_graph)
    q = gsub.add_parser("badconf")
    q.add_argument("space")
    q.add_argument("action")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_globalize_badconf)
    q = gsub.add_parser("leftsys")
    q.add_argument("system")
    q.add_argument("space")
    q.add_argument("actions", nargs="+")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_globalize_leftsys)

    p = sub.add_parser("average")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_average)

    p = sub.add_parser("probe")
    psub = p.add_subparsers(dest="probe_command")
    q = psub.add_parser("delta")
    q.add_argument("--p", type=float, required=True)
    q.add_argument("--dim", type=int, default=2)
    q.add_argument("--eps", type=float, nargs="+", required=True)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_probe_delta)
    q = psub.add_parser("rho")
    q.add_argument("--p", type=float, required=True)
    q.add_argument("--dim", type=int, default=2)
    q.add_argument("--tau", type=float, nargs="+", required=True)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_probe_rho)
    q = psub.add_parser("tree")
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_probe_tree)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if not hasattr(args, "fn"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except (SpaceError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
