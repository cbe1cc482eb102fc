"""Command-line entry point: ``riskcost {simulate,evaluate,calibrate,sweep,serve}``.

Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
Log verbosity comes from ``RISKCOST_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .calibration import apply_calibration_many, fit_isotonic, fit_platt, reliability_bins
from .config import load_policy_config, load_run_config
from .domain import Action, ConfigError, CostParameters, Label
from .persist import (
    load_map,
    read_labeled_csv,
    read_trace,
    records_from_steps,
    save_map,
    write_cost_curve,
    write_metrics,
    write_reliability,
    write_rows,
    write_trace,
)
from .policy import cumulative_objective
from .riskmetrics import LossSample, challenge_sweep, cost_curve, cvar_sorted, empirical_rates, risk_functional
from .robust import AmbiguityKind, AmbiguitySpec, worst_case_mean
from .simulator import run_simulation

log = logging.getLogger("riskcost")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_simulate(args) -> int:
    scenario, config = load_run_config(args.scenario)
    if args.seeds is not None and args.seeds < 1:
        raise ConfigError("--seeds must be >= 1", field="seeds")
    out = Path(args.out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    traces = run_simulation(scenario, config, workers=args.workers, replications=args.seeds)
    for trace in traces:
        write_trace(trace, out / "traces" / f"rep_{trace.replication:03d}.jsonl")
    write_metrics(traces, out / "metrics", alpha=config.alpha)
    obj = cumulative_objective([t.records for t in traces], config)
    doc = {"replications": len(traces), "expected": obj.expected, "cvar": obj.cvar,
           "leakage": obj.leakage, "objective": obj.total, "fingerprint": traces[0].fingerprint}
    (out / "objective.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = load_policy_config(args.scenario)
    paths = sorted(Path(args.traces).glob("*.jsonl"))
    if not paths:
        raise ConfigError(f"no .jsonl trace files under {args.traces}", field="traces")
    runs = [read_trace(p)["steps"] for p in paths]
    pairs = [(Action[s["action"]], Label.parse(s["label"])) for steps in runs for s in steps]
    rates = empirical_rates(pairs)
    logs = [records_from_steps(steps) for steps in runs]
    # per attempt, in the same units as the rates
    leakage = math.fsum(r.leakage_spent for rep in logs for r in rep) / max(rates.n_total, 1)
    obj = cumulative_objective(logs, config)
    per_step = [r.realized_loss for rep in logs for r in rep]
    doc = {
        "n_traces": len(runs),
        "rates": {"far": rates.far, "frr": rates.frr, "chr": rates.chr,
                  "n_impostor": rates.n_impostor, "n_legit": rates.n_legit, "n_total": rates.n_total},
        "risk_functional": risk_functional(rates, config.costs, leakage),
        "cvar_step_loss": cvar_sorted(LossSample(per_step), config.alpha),
        "objective": {"expected": obj.expected, "cvar": obj.cvar, "leakage": obj.leakage, "total": obj.total},
    }
    if args.robust:
        kind = AmbiguityKind(args.robust)
        sample = LossSample(per_step)
        curve = [(d, worst_case_mean(sample, AmbiguitySpec(kind, d))) for d in args.delta]
        doc["robust"] = {"kind": kind.value, "curve": [[d, v] for d, v in curve]}
        if args.out:
            write_rows(Path(args.out), ("delta", "worst_case_loss"), curve)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    scores, labels = read_labeled_csv(args.input, "score")
    if args.kind == "isotonic":
        cal_map = fit_isotonic(scores, labels)
    else:
        cal_map = fit_platt(scores, labels, ridge=args.ridge)
    probs = apply_calibration_many(cal_map, scores)
    diagram = reliability_bins(probs, labels, n_bins=args.bins)
    if args.out_map:
        save_map(cal_map, args.out_map)
    if args.out_reliability:
        write_reliability(diagram, args.out_reliability)
    print(json.dumps({"kind": args.kind, "n": len(scores), "ece": diagram.ece}, sort_keys=True))
    return EXIT_OK


def robust_cost_curve(scored, costs: CostParameters, thresholds: Sequence[float],
                      spec: AmbiguitySpec) -> List[tuple]:
    """Worst-case mean per-attempt loss of each two-action threshold rule."""
    p = np.array([s[0] for s in scored], dtype=float)
    impostor = np.array([Label.parse(s[1]) is Label.IMPOSTOR for s in scored], dtype=bool)
    out = []
    for tau in thresholds:
        accepted = p < tau
        losses = np.where(accepted, np.where(impostor, costs.c_fa, 0.0), np.where(impostor, 0.0, costs.c_fr))
        out.append((float(tau), worst_case_mean(LossSample(losses), spec)))
    return out


def cmd_sweep(args) -> int:
    if args.scenario:
        costs = load_policy_config(args.scenario).costs
    elif args.c_fa is not None and args.c_fr is not None:
        costs = CostParameters(c_fa=args.c_fa, c_fr=args.c_fr)
    else:
        raise ConfigError("sweep needs --scenario or both --c-fa and --c-fr", field="costs")
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1", field="steps")
    probs, labels = read_labeled_csv(args.input, "p")
    if any(p < 0 or p > 1 for p in probs):
        raise ConfigError("p values must lie in [0, 1]", field="p")
    scored = list(zip(probs, labels))
    grid = [(i + 1) / (args.steps + 1) for i in range(args.steps)]
    curve = cost_curve(scored, costs, grid)
    if args.out:
        write_cost_curve(curve, args.out)
    best = curve.argmin
    print(f"argmin threshold={best.threshold:.6g} expected_loss={best.expected_loss:.6g} "
          f"far={best.rates.far:.4f} frr={best.rates.frr:.4f}")
    if args.robust:
        spec = AmbiguitySpec(AmbiguityKind(args.robust), args.radius)
        robust = robust_cost_curve(scored, costs, grid, spec)
        if args.out_robust:
            write_rows(args.out_robust, ("threshold", "worst_case_loss"), robust)
        t_best, v_best = min(robust, key=lambda r: r[1])
        print(f"robust argmin threshold={t_best:.6g} worst_case_loss={v_best:.6g}")
    if args.c_ch:
        points = challenge_sweep(scored, costs, args.rho, args.c_ch)
        if args.out_challenge:
            write_rows(args.out_challenge, ("c_ch", "expected_loss", "far", "frr", "chr"),
                       [(pt.c_ch, pt.expected_loss, pt.rates.far, pt.rates.frr, pt.rates.chr) for pt in points])
        for pt in points:
            print(f"c_ch={pt.c_ch:.6g} expected_loss={pt.expected_loss:.6g} chr={pt.rates.chr:.4f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import DecisionService, create_app

    scenario, config = load_run_config(args.scenario)
    cal_map = load_map(args.map)
    service = DecisionService(config, scenario.challenge, cal_map, seed=args.seed)
    log.info("serving policy %s on %s:%d", service.policy_version, args.host, args.port)
    uvicorn.run(create_app(service), host=args.host, port=args.port,
                log_level=os.environ.get("RISKCOST_LOG_LEVEL", "warning").lower())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskcost", description="Risk-cost authentication decision engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run seeded replications of a scenario")
    p.add_argument("--scenario", required=True, help="JSON run config with a policy section")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=int, default=None, help="number of replications (overrides the file)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="rates, risk functional, CVaR and robust curves from traces")
    p.add_argument("--traces", required=True, help="directory of .jsonl traces")
    p.add_argument("--scenario", required=True, help="run config supplying costs, alpha and beta")
    p.add_argument("--robust", choices=[k.value for k in AmbiguityKind], default=None)
    p.add_argument("--delta", type=_floats, default=[0.0, 0.01, 0.02, 0.05, 0.1, 0.2],
                   help="comma-separated radii for the robust curve")
    p.add_argument("--out", default=None, help="CSV path for the robust curve")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="fit a calibration map from (score, label) CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=["platt", "isotonic"], default="platt")
    p.add_argument("--ridge", type=float, default=1e-3)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--out-map", default=None)
    p.add_argument("--out-reliability", default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="cost curve over accept thresholds from (p, label) CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--scenario", default=None)
    p.add_argument("--c-fa", type=float, default=None)
    p.add_argument("--c-fr", type=float, default=None)
    p.add_argument("--steps", type=int, default=99)
    p.add_argument("--out", default=None)
    p.add_argument("--c-ch", type=_floats, default=None, help="comma-separated challenge frictions")
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--out-challenge", default=None)
    p.add_argument("--robust", choices=[k.value for k in AmbiguityKind], default=None,
                   help="also sweep the worst-case loss over an ambiguity set")
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--out-robust", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the HTTP decision service")
    p.add_argument("--scenario", required=True)
    p.add_argument("--map", required=True, help="calibration map JSON")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("RISKCOST_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
