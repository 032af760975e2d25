"""``phylocsp`` command line.

Exit codes: 0 success, 1 infeasible or inconsistent input, 2 usage or
input error, 3 resource cap exceeded.  Randomised commands take
``--seed`` (default ``$PHYLOCSP_SEED`` or 0).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from . import coarse, csp, gap, problems
from . import random_assignment as ra
from .errors import ArgumentError, Inconsistent, NotFoundError, ResourceError
from .registry import load_registry

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


def _default_seed() -> int:
    raw = os.environ.get("PHYLOCSP_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ArgumentError(f"PHYLOCSP_SEED must be an integer, got {raw!r}") from None


def _rng(args):
    return np.random.default_rng(args.seed)


def _registry(args):
    return load_registry(args.registry) if getattr(args, "registry", None) else load_registry()


def _read_text(path):
    if path in (None, "-"):
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _report(args, body: dict, caps: dict | None = None):
    rep = {"command": args.command, "version": __version__, "seed": args.seed, "caps": caps or {}}
    rep.update(body)
    text = json.dumps(rep, indent=2, default=_jsonable, sort_keys=False) + "\n"
    _write_text(getattr(args, "report", None), text)


def _load_instance(args):
    return csp.read_instance(_read_text(args.instance), _registry(args), strict=True)


# ----------------------------------------------------------------------
# generation


def cmd_gen_gap(args):
    reg = _registry(args)
    spec = gap.GapSpec(args.payoff, args.d, reg)
    if args.k is not None and args.k != spec.k:
        raise ArgumentError(f"payoff {args.payoff} has arity {spec.k}, not {args.k}")
    inst = gap.build_gap(spec)
    _write_text(args.out, csp.write_instance(inst))
    return EXIT_OK


def cmd_gen_random(args):
    reg = _registry(args)
    f = reg[args.payoff]
    if args.n < f.k:
        raise ArgumentError(f"need at least {f.k} variables for {args.payoff}")
    if args.constraints < 1:
        raise ArgumentError("--constraints must be positive")
    rng = _rng(args)
    names = [f"v{i}" for i in range(1, args.n + 1)]
    w = Fraction(1, args.constraints)
    cons = [(args.payoff, tuple(names[i] for i in rng.choice(args.n, f.k, replace=False)), w)
            for _ in range(args.constraints)]
    _write_text(args.out, csp.write_instance(csp.Instance(names, cons, reg, normalize=False)))
    return EXIT_OK


# ----------------------------------------------------------------------
# solving


def _solution_body(val, sol):
    return {"value": val, "tree": sol.variable_tree().to_newick(), "order": [str(v) for v in sol.order()]}


def cmd_solve_brute(args):
    inst = _load_instance(args)
    val, sol = csp.brute_force_opt(inst, args.cap)
    _report(args, _solution_body(val, sol), {"brute_force": args.cap})
    return EXIT_OK


def cmd_solve_order(args):
    inst = _load_instance(args)
    pi = args.order.split(",") if args.order else list(inst.variables)
    val, sol = csp.opt_given_order(inst, pi, args.cap)
    _report(args, _solution_body(val, sol), {"order": args.cap})
    return EXIT_OK


def _measure(args):
    if args.caterpillar is None:
        return ra.BiasedMeasure.uniform()
    return ra.BiasedMeasure.caterpillar(args.caterpillar, side=args.side)


def cmd_solve_random(args):
    rng = _rng(args)
    m = _measure(args)
    if args.instance is not None:
        inst = _load_instance(args)
        mean, hw, _ = ra.instance_mc(m, inst, args.trials, rng)
        body = {"instance": args.instance, "mean": mean, "half_width_95": hw}
    else:
        if not args.payoff:
            raise ArgumentError("give --instance or --payoff")
        f = _registry(args)[args.payoff]
        mean, hw = ra.alpha_mc(m, f, args.trials, rng)
        body = {"payoff": args.payoff, "mean": mean, "half_width_95": hw}
        if f.k <= 6:
            body["alpha_exact"] = ra.alpha_exact(m, f)
    body["trials"] = args.trials
    body.update({"measure_" + k: v for k, v in m.to_dict().items()})
    _report(args, body)
    return EXIT_OK


def cmd_alpha_search(args):
    reg = _registry(args)
    names = args.payoff.split(",")
    fs = [reg[n] for n in names]
    if len(fs) == 1:
        rep = ra.alpha_opt_search(fs[0], args.depth, args.grid, args.refine)
    else:
        mu = [float(x) for x in args.mu.split(",")] if args.mu else [1 / len(fs)] * len(fs)
        rep = ra.mixture_threshold(fs, mu, args.depth, args.grid, args.refine)
    body = rep.to_dict()
    if args.trials:
        mc = []
        for f in fs:
            mean, hw = ra.alpha_mc(rep.measure, f, args.trials, _rng(args))
            mc.append({"payoff": f.name, "mean": mean, "half_width_95": hw})
        body["mc_check"] = mc
    _report(args, body, {"skeleton_depth": args.depth})
    return EXIT_OK


def cmd_reduce(args):
    inst = _load_instance(args)
    q, gamma = problems.triplets_to_quartets(inst, args.gamma)
    _write_text(args.out, csp.write_instance(q))
    print(f"gamma: {gamma}", file=sys.stderr)
    return EXIT_OK


def cmd_build(args):
    inst = _load_instance(args)
    trips = [c.args for c in inst.constraints if c.payoff == "triplet"]
    try:
        t = problems.aho_build(trips, inst.variables)
    except Inconsistent as exc:
        _report(args, {"consistent": False, "conflict": [str(x) for x in exc.labels]})
        return EXIT_INFEASIBLE
    _report(args, {"consistent": True, "tree": t.to_newick()})
    return EXIT_OK


# ----------------------------------------------------------------------
# experiments


def exp_gap_order(args):
    spec = gap.GapSpec(args.payoff, args.d, _registry(args))
    if args.k is not None and args.k != spec.k:
        raise ArgumentError(f"payoff {args.payoff} has arity {spec.k}, not {args.k}")
    res = gap.order_experiment(spec, args.orders, _rng(args), all_orders=args.all_orders)
    return {"payoff": spec.name, "k": spec.k, "d": spec.d, "mean": res.mean, "stderr": res.stderr,
            "exact": res.exact, "values": res.values}, {"order": 13}


def exp_monochrome(args):
    spec = gap.GapSpec(args.payoff, args.d, _registry(args))
    inst = gap.build_gap(spec)
    rep = coarse.monochrome_experiment(inst, args.eps, args.q, args.orders, _rng(args), C=args.C)
    return {"payoff": spec.name, "k": spec.k, "d": spec.d, **rep.to_dict()}, {"exact_q": 5}


def exp_divergence(args):
    rng = _rng(args)
    k, d, q = args.k, args.d, args.q
    bound = gap.divergence_bound(q, d)
    labelings = {}
    if args.labeling in ("random", "all"):
        for t in range(args.trials):
            labelings[f"random-{t}"] = rng.integers(0, q, k**d)
    if args.labeling in ("adversarial", "all"):
        labelings.update(gap.adversarial_labelings(k, d, q))
    vals = {name: gap.child_label_divergence(k, d, lab, q) for name, lab in labelings.items()}
    return {"k": k, "d": d, "q": q, "bound": bound, "max": max(vals.values()),
            "all_within_bound": all(v <= bound + 1e-12 for v in vals.values()), "values": vals}, {}


def exp_coupling(args):
    rep = gap.coupling_experiment(args.M, args.dprime, args.trials, _rng(args), k=args.k, eta=args.eta)
    rep["chi2_pass"] = rep["chi2_pvalue"] > 0.001
    return rep, {"N": gap.LMN_CAP}


EXPERIMENTS = {"gap-order": exp_gap_order, "monochrome": exp_monochrome,
               "divergence": exp_divergence, "coupling": exp_coupling}


def cmd_experiment(args):
    body, caps = EXPERIMENTS[args.name](args)
    body = {"experiment": args.name, **body}
    _report(args, body, caps)
    return EXIT_OK


def cmd_verify(args):
    from . import verify

    if args.instance:
        inst = _load_instance(args)
        print(f"instance ok: {len(inst.variables)} variables, {len(inst.constraints)} constraints")
    results = verify.run(args.filter, args.seed)
    failed = 0
    for module, name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {module}.{name}: {detail}")
        failed += not ok
    if not results:
        print("no checks matched the filter", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK if failed == 0 else EXIT_INFEASIBLE


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phylocsp", description="Phylogenetic CSP workbench.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default $PHYLOCSP_SEED or 0)")
    common.add_argument("--registry", help="file with extra payoff tables")
    common.add_argument("--report", help="write the JSON report here (default stdout)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-gap", parents=[common], help="gap instance on a perfect k-ary tree")
    s.add_argument("--payoff", required=True)
    s.add_argument("--k", type=int, help="arity check; must match the payoff")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_gen_gap)

    s = sub.add_parser("gen-random", parents=[common], help="random instance with uniform weights")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--constraints", type=int, required=True)
    s.add_argument("--payoff", default="triplet")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_gen_random)

    s = sub.add_parser("solve-brute", parents=[common], help="exact optimum by enumeration")
    s.add_argument("instance", nargs="?", default="-")
    s.add_argument("--cap", type=int, default=csp.BRUTE_FORCE_CAP)
    s.set_defaults(func=cmd_solve_brute)

    s = sub.add_parser("solve-order", parents=[common], help="best tree with a fixed leaf order")
    s.add_argument("instance", nargs="?", default="-")
    s.add_argument("--order", help="comma-separated variables (default: declaration order)")
    s.add_argument("--cap", type=int, default=csp.ORDER_CAP)
    s.set_defaults(func=cmd_solve_order)

    s = sub.add_parser("solve-random", parents=[common], help="Monte Carlo random assignment")
    s.add_argument("instance", nargs="?", default=None)
    s.add_argument("--payoff")
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--caterpillar", type=float, metavar="DELTA", help="biased caterpillar instead of fair splits")
    s.add_argument("--side", choices=("left", "right"), default="left")
    s.set_defaults(func=cmd_solve_random)

    s = sub.add_parser("alpha-search", parents=[common], help="search for the best biased measure")
    s.add_argument("--payoff", required=True, help="name, or comma-separated names for a mixture")
    s.add_argument("--mu", help="comma-separated mixture weights")
    s.add_argument("--depth", type=int, default=4)
    s.add_argument("--grid", type=float, default=0.05)
    s.add_argument("--refine", type=int, default=2)
    s.add_argument("--trials", type=int, default=0, help="Monte Carlo cross-check trials")
    s.set_defaults(func=cmd_alpha_search)

    s = sub.add_parser("triplets-to-quartets", parents=[common], help="add a root leaf to every triplet")
    s.add_argument("instance", nargs="?", default="-")
    s.add_argument("--gamma")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("build", parents=[common], help="tree consistent with all triplets, if any")
    s.add_argument("instance", nargs="?", default="-")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("experiment", parents=[common], help="run an experiment and emit JSON")
    s.add_argument("name", choices=sorted(EXPERIMENTS))
    s.add_argument("--payoff", default="triplet")
    s.add_argument("--k", type=int)
    s.add_argument("--d", type=int, help="depth (default 4 for divergence, else 2)")
    s.add_argument("--orders", type=int, default=200)
    s.add_argument("--all-orders", action="store_true")
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--q", type=int, default=4)
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--labeling", choices=("random", "adversarial", "all"), default="all")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--M", type=int, default=4)
    s.add_argument("--dprime", type=int, default=3)
    s.add_argument("--eta", type=float, default=0.0)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    s.add_argument("--filter", action="append", help="only checks whose module or name contains this")
    s.add_argument("--instance", help="also validate this instance file")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.command == "experiment":
            if args.k is None and args.name in ("divergence", "coupling"):
                args.k = 3 if args.name == "divergence" else 2
            if args.d is None:
                args.d = 4 if args.name == "divergence" else 2
        return args.func(args)
    except (ArgumentError, NotFoundError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except Inconsistent as exc:
        print(f"inconsistent: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
