"""Command-line entry point: ``nslr {solve,bench,gen,verify}``.

Exit codes: 0 success, 1 solver/numerical failure or failed checks,
2 usage errors (bad flags, missing files, invalid sparsity).
"""
import argparse
import csv
import io
import json
import logging
import os
import sys

from . import bench, data, verify
from .solver import SolverConfig

__all__ = ["main", "build_parser"]


def _add_solver_flags(p):
    p.add_argument("--s", type=int, required=True, help="sparsity level")
    p.add_argument("--tau0", type=float, default=1.0)
    p.add_argument("--tau-decay", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=1e-6, help="residual tolerance")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--ridge", type=float, default=1e-10, help="ridge fallback mu")


def build_parser():
    parser = argparse.ArgumentParser(prog="nslr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fit one solver on a LIBSVM dataset")
    p.add_argument("data", help="training file (LIBSVM format)")
    p.add_argument("--test", help="optional test file (LIBSVM format)")
    p.add_argument("--n-train", type=int, help="split off the first N rows for training")
    p.add_argument("--n-features", type=int, help="feature count override")
    p.add_argument("--preprocess", choices=["none", "two_pass", "unit_interval"], default="none")
    p.add_argument("--solver", choices=sorted(bench.SOLVERS), default="nslr")
    _add_solver_flags(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--trace", action="store_true", help="include the iteration trace (json)")
    p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("bench", help="run a benchmark sweep from a JSON config")
    p.add_argument("config")
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="CSV path; the JSON sidecar goes next to it")

    p = sub.add_parser("gen", help="write a synthetic dataset in LIBSVM format")
    p.add_argument("--example", type=int, choices=[1, 2], required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, help="true sparsity (example 2)")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="manifest path (default: OUT.manifest.json)")

    p = sub.add_parser("verify", help="run the built-in oracle and bound checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args, parser):
    for path in filter(None, [args.data, args.test]):
        if not os.path.exists(path):
            parser.error(f"no such file: {path}")
    try:
        if args.n_features is not None:
            train = data.parse_libsvm(args.data, n_features=args.n_features)
            test = None
            if args.test:
                test = data.parse_libsvm(args.test, n_features=args.n_features)
            prepared = data.PreparedData(train=train, test=test, provenance={"path": args.data})
        else:
            prepared = data.load_libsvm_data(
                args.data, test_path=args.test, n_train=args.n_train, preprocess=args.preprocess
            )
    except ValueError as exc:
        parser.error(str(exc))
    cfg = SolverConfig(
        s=args.s,
        tau0=args.tau0,
        tau_decay=args.tau_decay,
        epsilon=args.eps,
        max_iter=args.max_iter,
        ridge_mu=args.ridge,
    )
    try:
        cfg.validate(prepared.p)
    except ValueError as exc:
        parser.error(str(exc))
    report = bench.run_solver(args.solver, prepared.train, cfg)
    result = bench.evaluate(report, prepared, config=cfg.snapshot())

    if args.format == "json":
        payload = {"solver": result.solver, "indicators": result.indicators(),
                   "config": result.config}
        if args.trace:
            payload["trace"] = result.trace
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        header = ["solver", "loss", "grad_norm", "ser", "time_s", "nnz", "converged", "iterations"]
        row = [result.solver, f"{result.loss:.6e}", f"{result.grad_norm:.6e}", f"{result.ser:.6e}",
               f"{result.time_seconds:.6e}", str(result.nnz), str(result.converged),
               str(result.iterations)]
        if result.loss_test is not None:
            header += ["loss_test", "ser_test"]
            row += [f"{result.loss_test:.6e}", f"{result.ser_test:.6e}"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerow(row)
        _emit(buf.getvalue(), args.out)
    if report.error:
        print(f"nslr: solver failed: {report.error}", file=sys.stderr)
        return 1
    return 0


def _cmd_bench(args, parser):
    if not os.path.exists(args.config):
        parser.error(f"no such file: {args.config}")
    try:
        cfg = bench.load_config(args.config)
    except (ValueError, json.JSONDecodeError) as exc:
        parser.error(f"bad config: {exc}")
    rows, sidecar, failed = bench.run_matrix(cfg, workers=args.workers)
    if args.out:
        bench.write_csv(rows, args.out)
        root, _ = os.path.splitext(args.out)
        with open(root + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=1)
    elif args.format == "json":
        sys.stdout.write(json.dumps(sidecar, indent=1) + "\n")
    else:
        sys.stdout.write(bench.write_csv(rows))
    n_cells = len(sidecar["cells"]) // max(1, len(cfg.get("solvers", ["nslr"])))
    if failed:
        print(f"nslr: {failed}/{n_cells} cells failed", file=sys.stderr)
    return 1 if n_cells and failed == n_cells else 0


def _cmd_gen(args, parser):
    try:
        if args.example == 1:
            prepared = data.gen_example1(data.Spec1(n=args.n, p=args.p, seed=args.seed))
        else:
            if args.s is None:
                parser.error("--s is required for --example 2")
            prepared = data.gen_example2(
                data.Spec2(n=args.n, p=args.p, s=args.s, rho=args.rho, seed=args.seed)
            )
    except ValueError as exc:
        parser.error(str(exc))
    data.serialize_libsvm(prepared.train, args.out)
    manifest = args.manifest or args.out + ".manifest.json"
    data.write_manifest(prepared, manifest, file=args.out)
    return 0


def _cmd_verify(args, parser):
    results = verify.run_all(seed=args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


_COMMANDS = {"solve": _cmd_solve, "bench": _cmd_bench, "gen": _cmd_gen, "verify": _cmd_verify}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return _COMMANDS[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
