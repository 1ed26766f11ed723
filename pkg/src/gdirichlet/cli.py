"""Command line entry point: ``gdirichlet <subcommand> ...``.

Exit codes: 0 success, 1 failed ``--assert``, 2 configuration or usage
error, 3 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, kernels
from .errors import BudgetError, ConfigError, GDirichletError
from .geometry import AffinePair, verify_transference_part1, verify_transference_part2

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
SEED_MAX = 2 ** 64 - 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunManifest:
    subcommand: str
    argv: list
    config: dict
    seed: int | None
    version: str
    implementation: str
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write_text(target: str, text: str, outputs: list):
    if target == "-":
        sys.stdout.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)
        outputs.append(target)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        # repr gives the shortest string that parses back to the same float
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(args, payload: dict | None, csv_header=None, csv_rows=None, outputs=None):
    if payload is not None and args.json:
        _write_text(args.json, _dump(payload), outputs)
    if csv_rows is not None and getattr(args, "csv", None):
        _write_text(args.csv, _csv_text(csv_header, csv_rows), outputs)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _load_ws(spec):
    from .config import parse_weights
    if spec is None:
        return None
    return parse_weights(spec)


def cmd_check(args, outputs):
    from .config import parse_approx, parse_matrix, parse_vector
    from .oracle import dirichlet_on_window
    from .weights import WeightSystem
    theta = parse_matrix(args.theta)
    ws = _load_ws(args.weights) or WeightSystem.powers([1.0 / theta.shape[0]] * theta.shape[0],
                                                       [1.0 / theta.shape[1]] * theta.shape[1])
    theta = parse_matrix(args.theta, (ws.n, ws.m))
    eta = parse_vector(args.eta, ws.n)
    g = parse_approx(args.g, ws) if args.g else ws.dirichlet_exponent()
    rep = dirichlet_on_window(AffinePair(theta, eta), ws, g, (args.tmin, args.tmax),
                              n_max=args.budget)
    payload = rep.to_json()
    csv_rows = [(float(a), float(b)) for a, b in rep.gaps]
    _emit(args, payload, ["gap_left", "gap_right"], csv_rows, outputs)
    if not args.json:
        sys.stdout.write(f"{rep.verdict} gaps={len(rep.gaps)} witnesses={len(rep.lefts)}\n")
    return EXIT_ASSERT if args.assert_ and not rep.ok else EXIT_OK


def cmd_zeroone(args, outputs):
    from .config import load_json, parse_approx, parse_weights
    from .experiments import pilot_calibration, zero_one_experiment
    if args.pilot:
        cal = pilot_calibration(N=args.n or 500, seed=args.seed, workers=args.workers)
        _emit(args, cal, outputs=outputs)
        if not args.json:
            sys.stdout.write(_dump(cal))
        return EXIT_OK
    if not args.config:
        raise ConfigError("zeroone needs --config (or --pilot)")
    cfg = load_json(args.config)
    ws = parse_weights(cfg.get("weights", {"rho": [1.0], "sigma": [1.0]}))
    g = parse_approx(cfg.get("g", {"kind": "dirichlet"}), ws)
    N = int(args.n or cfg.get("N", 100))
    schedule = cfg.get("schedule", [1e2, 1e3])
    t_min = float(cfg.get("t_min", 1.0))
    est = zero_one_experiment(ws, g, N, schedule, args.seed, t_min, args.workers,
                              cfg.get("label", ""), n_max=args.budget)
    _emit(args, est.to_json(), ["t_max", "fraction", "n_budget_errors"], est.csv_rows(),
          outputs)
    if not (args.json or args.csv):
        for t, f, e in est.csv_rows():
            sys.stdout.write(f"{t:g} {f:.4f} {e}\n")
    fr = est.fractions
    monotone = all(b <= a for a, b in zip(fr, fr[1:]))
    return EXIT_ASSERT if args.assert_ and not monotone else EXIT_OK


def cmd_transference(args, outputs):
    reports = {}
    if args.part in ("1", "both"):
        r = verify_transference_part1(args.dim, args.trials, args.seed)
        reports["part1"] = {**asdict(r), "histogram": r.histogram()}
        reports["part1"].pop("scale_ratios")
    if args.part in ("2", "both"):
        r = verify_transference_part2(args.dim, args.trials, args.gamma_samples, args.seed)
        reports["part2"] = {**asdict(r), "histogram": r.histogram()}
        reports["part2"].pop("scale_ratios")
    violations = sum(r["violations"] + r["nonzero_violations"] for r in reports.values())
    payload = {"dim": args.dim, "trials": args.trials, "seed": args.seed,
               "violations": violations, **reports,
               "min_scale_histogram": {k: r["histogram"] for k, r in reports.items()}}
    for k, r in reports.items():
        payload[f"violations_{k}"] = r["violations"] + r["nonzero_violations"]
    _emit(args, payload, outputs=outputs)
    if not args.json:
        sys.stdout.write(f"dim={args.dim} trials={args.trials} violations={violations}\n")
    return EXIT_ASSERT if args.assert_ and violations else EXIT_OK


def cmd_systole(args, outputs):
    from .badapprox import liouville_systole, log_grid, systole_trace
    from .config import parse_matrix
    from .weights import WeightSystem
    if args.theta == "liouville":
        tr = liouville_systole(t_max=args.tmax, factor=args.grid_factor)
    else:
        theta = parse_matrix(args.theta)
        ws = _load_ws(args.weights) or WeightSystem.powers(
            [1.0 / theta.shape[0]] * theta.shape[0], [1.0 / theta.shape[1]] * theta.shape[1])
        theta = parse_matrix(args.theta, (ws.n, ws.m))
        tr = systole_trace(theta, ws, log_grid(args.tmax, args.grid_factor), n_max=args.budget)
    _emit(args, tr.to_json(), ["T", "systole", "running_min"], tr.rows(), outputs)
    if not (args.json or args.csv):
        sys.stdout.write(f"running_min={tr.running_min[-1]!r} ({tr.note})\n")
    ok = args.threshold is None or tr.running_min[-1] >= args.threshold
    return EXIT_ASSERT if args.assert_ and not ok else EXIT_OK


def cmd_improvability(args, outputs):
    from .badapprox import improvability_experiment
    from .config import parse_approx, parse_matrix
    from .experiments import sample_rng
    from .weights import WeightSystem, f1
    theta = parse_matrix(args.theta)
    ws = _load_ws(args.weights) or WeightSystem.powers([1.0 / theta.shape[0]] * theta.shape[0],
                                                       [1.0 / theta.shape[1]] * theta.shape[1])
    theta = parse_matrix(args.theta, (ws.n, ws.m))
    f = parse_approx(args.f, ws) if args.f else f1()
    delta = args.delta if args.delta is not None else 1.0 / (4 * (ws.n + ws.m))
    etas = np.array([sample_rng(args.seed, i).random(ws.n) for i in range(args.samples)])
    rep = improvability_experiment(theta, ws, f, delta, etas, (1.0, args.tmax),
                                   n_max=args.budget)
    payload = {**rep.to_json(), "seed": args.seed}
    _emit(args, payload, outputs=outputs)
    if not args.json:
        sys.stdout.write(f"witnesses={len(rep.witnesses)} counterexamples="
                         f"{len(rep.counterexamples)} inconclusive={rep.inconclusive}\n")
    return EXIT_ASSERT if args.assert_ and rep.counterexamples else EXIT_OK


def cmd_weights(args, outputs):
    from .weights import emit_changing_weights_csv
    if args.example != "changing-weights":
        raise ConfigError(f"unknown example {args.example!r}")
    text = emit_changing_weights_csv(args.tmax, args.points)
    _write_text(args.csv or "-", text, outputs)
    return EXIT_OK


def cmd_series(args, outputs):
    from .config import parse_approx
    from .experiments import check_series_equivalence, family_objects, stock_families
    if args.stock:
        out = []
        for fam in stock_families():
            ws, g = family_objects(fam)
            rep = check_series_equivalence(ws, g, args.base, args.blocks)
            out.append({"name": fam["name"], "expected": fam["classification"],
                        "dirichlet": rep.dirichlet.verdict,
                        "khintchine_groshev": rep.khintchine_groshev.verdict,
                        "numeric": rep.dirichlet.numeric, "consistent": rep.consistent})
        payload = {"families": out}
        ok = all(r["consistent"] and r["dirichlet"] == r["expected"] for r in out)
    else:
        ws = _load_ws(args.weights)
        if ws is None or not args.g:
            raise ConfigError("series needs --weights and --g (or --stock)")
        rep = check_series_equivalence(ws, parse_approx(args.g, ws), args.base, args.blocks)
        payload = rep.to_json()
        ok = rep.consistent
    _emit(args, payload, outputs=outputs)
    if not args.json:
        if args.stock:
            for r in payload["families"]:
                sys.stdout.write(f"{r['name']}: {r['dirichlet']} / {r['khintchine_groshev']}\n")
        else:
            sys.stdout.write(f"dirichlet={rep.dirichlet.verdict} "
                             f"khintchine_groshev={rep.khintchine_groshev.verdict}\n")
    return EXIT_ASSERT if args.assert_ and not ok else EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _common(p):
    p.add_argument("--json", metavar="PATH|-", help="write the JSON report here")
    p.add_argument("--seed", type=_seed, default=0, help="64-bit unsigned seed (default 0)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: available CPUs)")
    p.add_argument("--assert", dest="assert_", action="store_true",
                   help="exit 1 when the run's check fails")
    p.add_argument("--budget", type=int, default=10_000_000, help="candidate budget")
    p.add_argument("--manifest", metavar="PATH", help="where to write the run manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gdirichlet", description="Weighted Dirichlet pair experiments")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--from-manifest", metavar="PATH",
                        help="replay the command recorded in a manifest")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("check", help="windowed Dirichlet verdict for one pair")
    _common(p)
    p.add_argument("--theta", required=True, help="inline CSV (rows split by ';') or file")
    p.add_argument("--eta", help="inline CSV shift vector (default 0)")
    p.add_argument("--weights", help="weights config JSON (default: equal powers)")
    p.add_argument("--g", help="approximation function config JSON (default g_ab)")
    p.add_argument("--tmin", type=float, default=1.0)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--csv", metavar="PATH|-", help="write the gaps as CSV")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("zeroone", help="Monte Carlo fraction of Dirichlet pairs")
    _common(p)
    p.add_argument("--config", help="JSON with weights, g, N, schedule, t_min")
    p.add_argument("--n", type=int, help="override the sample count")
    p.add_argument("--pilot", action="store_true",
                   help="run the zero-one pilot calibration instead")
    p.add_argument("--csv", metavar="PATH|-", help="columns t_max,fraction,n_budget_errors")
    p.set_defaults(func=cmd_zeroone)

    p = sub.add_parser("transference", help="transference lemma checks")
    tsub = p.add_subparsers(dest="action", parser_class=_Parser, required=True)
    t = tsub.add_parser("selftest", help="random lattices against both lemma parts")
    _common(t)
    t.add_argument("--dim", type=int, default=3)
    t.add_argument("--trials", type=int, default=100)
    t.add_argument("--part", choices=["1", "2", "both"], default="both")
    t.add_argument("--gamma-samples", type=int, default=100)
    t.set_defaults(func=cmd_transference)

    p = sub.add_parser("systole", help="systole along the weighted flow")
    _common(p)
    p.add_argument("--theta", required=True, help="golden, liouville, inline CSV or file")
    p.add_argument("--weights")
    p.add_argument("--tmax", type=float, default=1e6)
    p.add_argument("--grid-factor", type=float, default=1.05)
    p.add_argument("--threshold", type=float, help="with --assert: require running_min >= this")
    p.add_argument("--csv", metavar="PATH|-", help="columns T,systole,running_min")
    p.set_defaults(func=cmd_systole)

    p = sub.add_parser("improvability", help="resonance containment experiment")
    _common(p)
    p.add_argument("--theta", required=True)
    p.add_argument("--weights")
    p.add_argument("--f", help="approximation function config JSON (default 1/T)")
    p.add_argument("--delta", type=float)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--tmax", type=float, default=1e4)
    p.set_defaults(func=cmd_improvability)

    p = sub.add_parser("weights", help="weight function utilities")
    wsub = p.add_subparsers(dest="action", parser_class=_Parser, required=True)
    w = wsub.add_parser("emit", help="tabulate an example weight system")
    _common(w)
    w.add_argument("--example", default="changing-weights")
    w.add_argument("--tmax", type=float, default=625.0)
    w.add_argument("--points", type=int, default=1001)
    w.add_argument("--csv", metavar="PATH|-", help="columns t,gamma1,gamma2,phi1,phi2")
    w.set_defaults(func=cmd_weights)

    p = sub.add_parser("series", help="zero-one series classification")
    _common(p)
    p.add_argument("--weights")
    p.add_argument("--g")
    p.add_argument("--stock", action="store_true", help="classify the shipped families")
    p.add_argument("--base", type=float, default=2.0)
    p.add_argument("--blocks", type=int, default=200)
    p.set_defaults(func=cmd_series)
    return parser


def _config_of(args) -> dict:
    skip = {"func", "json", "csv", "manifest", "from_manifest"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.from_manifest:
            from .config import load_json
            man = load_json(args.from_manifest)
            argv = list(man["argv"])
            args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return EXIT_CONFIG
        if args.workers is None:
            from .experiments import default_workers
            args.workers = default_workers()
        outputs = []
        start = time.perf_counter()
        code = args.func(args, outputs)
        manifest = RunManifest(args.command + (f" {args.action}" if getattr(args, "action", None)
                                               else ""),
                               argv, _config_of(args), getattr(args, "seed", None), __version__,
                               kernels.IMPLEMENTATION, time.perf_counter() - start,
                               list(outputs))
        target = args.manifest or (outputs[0] + ".manifest.json" if outputs else None)
        if target:
            with open(target, "w") as fh:
                fh.write(_dump(manifest.to_json()))
        return code
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_CONFIG
    except BudgetError as exc:
        sys.stderr.write(f"budget exceeded: {exc}\n")
        return EXIT_BUDGET
    except (ConfigError, GDirichletError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
