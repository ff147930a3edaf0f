"""Command-line surface: solve, verify, gen, oracle, and bench.

Exit codes: 0 success, 1 failed verification, 2 bad input or cap exceeded,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time

from .errors import CapExceededError, InvariantViolationError, TreeParseError
from .labeling import (
    brute_force_lambda,
    find_violation,
    oracle_cap,
)
from .solver import PartitionParams, decide_lambda, solve_l21, solve_lp1
from .tree_core import generate_tree, parse_tree, tree_to_text

BENCH_HEADER = "n,delta,algorithm,ns,delta_computations,v1,v2,v3,v4,v5"


def _read_tree(path):
    with open(path, "r", encoding="ascii") as fh:
        return parse_tree(fh.read())


def _partition_params(args, tree):
    if args.vm_cap is None and args.vm2_cap is None and args.v45_split is None:
        return None
    base = PartitionParams.paper(tree.max_degree)
    return PartitionParams(
        vm_cap=args.vm_cap if args.vm_cap is not None else base.vm_cap,
        vm2_cap=args.vm2_cap if args.vm2_cap is not None else base.vm2_cap,
        v45_split=args.v45_split if args.v45_split is not None else base.v45_split,
        band_level=base.band_level,
    )


def cmd_solve(args):
    tree = _read_tree(args.input)
    params = _partition_params(args, tree)
    if args.lam is not None:
        res = decide_lambda(
            tree,
            args.p,
            args.lam,
            algorithm=args.algorithm,
            want_witness=args.witness,
            params=params,
        )
        if args.json:
            out = {"feasible": res.feasible, "lambda": args.lam}
            if res.witness is not None:
                out["labels"] = list(res.witness.labels)
            print(json.dumps(out))
        else:
            print("yes" if res.feasible else "no")
            if res.witness is not None:
                print(json.dumps({"lambda": args.lam, "labels": list(res.witness.labels)}))
    else:
        if args.p == 2:
            res = solve_l21(
                tree, want_witness=args.witness, algorithm=args.algorithm, params=params
            )
        else:
            res = solve_lp1(
                tree, args.p, want_witness=args.witness, algorithm=args.algorithm,
                params=params,
            )
        if args.json:
            out = {"lambda": res.lam}
            if res.witness is not None:
                out["labels"] = list(res.witness.labels)
            print(json.dumps(out))
        else:
            print(f"lambda {res.lam}")
            if res.witness is not None:
                print(json.dumps({"lambda": res.lam, "labels": list(res.witness.labels)}))
    if args.stats:
        st = res.stats
        cc = st.class_counts
        print(
            f"stats tier={st.tier} pieces={st.pieces} removed={st.removed_leaves} "
            f"splits={st.splits} delta_computations={st.delta_computations} "
            f"cache_hits={st.table_cache_hits} "
            f"v1={cc[1]} v2={cc[2]} v3={cc[3]} v4={cc[4]} v5={cc[5]} "
            f"coverage={dict(st.coverage)}",
            file=sys.stderr,
        )
    return 0


def cmd_verify(args):
    tree = _read_tree(args.input)
    with open(args.labels, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "labels" not in doc:
        print("labels file must be a JSON object with a 'labels' array", file=sys.stderr)
        return 2
    labels = doc["labels"]
    if len(labels) != tree.n:
        print(
            f"label count mismatch: {len(labels)} labels for {tree.n} vertices",
            file=sys.stderr,
        )
        return 2
    if any((not isinstance(x, int)) or x < 0 for x in labels):
        print("labels must be nonnegative integers", file=sys.stderr)
        return 2
    bad = find_violation(tree, labels, args.p, args.q)
    if bad is None:
        declared = doc.get("lambda")
        if declared is not None and max(labels) > declared:
            print(f"label {max(labels)} exceeds declared lambda {declared}")
            return 1
        print("valid")
        return 0
    kind, u, v = bad
    if kind == "adjacent":
        print(f"edge ({u}, {v}): |{labels[u]} - {labels[v]}| < {args.p}")
    else:
        print(f"distance-2 pair ({u}, {v}): |{labels[u]} - {labels[v]}| < {args.q}")
    return 1


def cmd_gen(args):
    tree = generate_tree(args.kind, args.n, delta=args.delta, seed=args.seed)
    sys.stdout.write(tree_to_text(tree))
    return 0


def cmd_oracle(args):
    tree = _read_tree(args.input)
    cap = oracle_cap()
    lam, witness = brute_force_lambda(tree, args.p, args.q, cap=cap)
    print(f"lambda {lam}")
    print(json.dumps({"lambda": lam, "labels": list(witness.labels)}))
    return 0


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",") if s]
    algorithms = [a for a in args.algorithms.split(",") if a]
    print(BENCH_HEADER)
    for n in sizes:
        tree = generate_tree("random", n, delta=args.delta, seed=args.seed)
        for algo in algorithms:
            runs = []
            for _ in range(args.repeats):
                t0 = time.perf_counter_ns()
                res = solve_l21(tree, want_witness=False, algorithm=algo)
                elapsed = time.perf_counter_ns() - t0
                runs.append((elapsed, res))
            runs.sort(key=lambda r: r[0])
            ns = int(statistics.median(r[0] for r in runs))
            res = runs[len(runs) // 2][1]
            cc = res.stats.class_counts
            print(
                f"{n},{args.delta},{algo},{ns},{res.stats.delta_computations},"
                f"{cc[1]},{cc[2]},{cc[3]},{cc[4]},{cc[5]}"
            )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lambdatree",
        description="Decide and construct optimal distance-constrained tree labelings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="optimize the span, or decide one")
    p_solve.add_argument("--input", required=True)
    p_solve.add_argument("--p", type=int, default=2)
    p_solve.add_argument("--lambda", dest="lam", type=int, default=None)
    p_solve.add_argument(
        "--algorithm", choices=["ck", "fast", "linear", "auto"], default="auto"
    )
    p_solve.add_argument("--witness", action="store_true")
    p_solve.add_argument("--json", action="store_true")
    p_solve.add_argument("--stats", action="store_true")
    p_solve.add_argument("--vm-cap", dest="vm_cap", type=int, default=None)
    p_solve.add_argument("--vm2-cap", dest="vm2_cap", type=int, default=None)
    p_solve.add_argument("--v45-split", dest="v45_split", type=int, default=None)
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="check a labeling file")
    p_verify.add_argument("--input", required=True)
    p_verify.add_argument("--labels", required=True)
    p_verify.add_argument("--p", type=int, default=2)
    p_verify.add_argument("--q", type=int, default=1)
    p_verify.set_defaults(func=cmd_verify)

    p_gen = sub.add_parser("gen", help="emit a generated tree")
    p_gen.add_argument(
        "--kind",
        required=True,
        choices=["path", "star", "caterpillar", "broom", "random", "v45_stress"],
    )
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--delta", type=int, default=None)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=cmd_gen)

    p_oracle = sub.add_parser("oracle", help="brute-force optimum for small trees")
    p_oracle.add_argument("--input", required=True)
    p_oracle.add_argument("--p", type=int, required=True)
    p_oracle.add_argument("--q", type=int, default=1)
    p_oracle.set_defaults(func=cmd_oracle)

    p_bench = sub.add_parser("bench", help="CSV runtime records")
    p_bench.add_argument("--sizes", required=True, help="comma-separated sizes")
    p_bench.add_argument("--delta", type=int, required=True)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--algorithms", default="linear")
    p_bench.add_argument("--repeats", type=int, default=1)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TreeParseError, CapExceededError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolationError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
