"""Compare CVaR of replication loss totals with and without the tail-risk weight.

    python3 scripts/tail_risk.py --seeds 20 --out results/tail_risk.csv
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from riskcost.config import load_run_config
from riskcost.persist import write_rows
from riskcost.riskmetrics import LossSample, cvar_sorted
from riskcost.simulator import run_simulation

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default=str(ROOT / "scenarios" / "heavy_tail.json"))
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--betas", default="0,0.25,0.5,1")
    parser.add_argument("--out", default="results/tail_risk.csv")
    args = parser.parse_args()

    scenario, base = load_run_config(args.scenario)
    betas = [float(b) for b in args.betas.split(",")]
    rows = []
    for seed in range(args.seeds):
        sc = dataclasses.replace(scenario, seed=seed)
        for beta in betas:
            cfg = dataclasses.replace(base, beta=beta)
            totals = [t.summary.total_loss for t in run_simulation(sc, cfg)]
            rows.append((seed, beta, float(np.mean(totals)), cvar_sorted(LossSample(totals), cfg.alpha)))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_rows(out, ("seed", "beta", "mean_total", "cvar_total"), rows)
    for beta in betas:
        cv = [r[3] for r in rows if r[1] == beta]
        mu = [r[2] for r in rows if r[1] == beta]
        print(f"beta={beta:g}: median CVaR {np.median(cv):.1f}, median mean {np.median(mu):.1f}")


if __name__ == "__main__":
    main()
