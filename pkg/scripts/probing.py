"""FAR under a probing adversary: fixed calibration versus periodic re-fitting.

    python3 scripts/probing.py --seeds 20 --out results/probing.csv
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from riskcost.config import load_run_config
from riskcost.persist import write_rows
from riskcost.simulator import run_replication

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default=str(ROOT / "scenarios" / "probing.json"))
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--out", default="results/probing.csv")
    args = parser.parse_args()

    scenario, base = load_run_config(args.scenario)
    rows = []
    for seed in range(args.seeds):
        sc = dataclasses.replace(scenario, seed=seed)
        for mode in ("fixed", "windowed"):
            tr = run_replication(sc, dataclasses.replace(base, calibration_mode=mode), 0)
            final_rate = tr.adversary_rates[-1] if tr.adversary_rates else float("nan")
            rows.append((seed, mode, tr.summary.rates.far, tr.summary.rates.chr, tr.summary.total_loss, final_rate))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_rows(out, ("seed", "calibration_mode", "far", "chr", "total_loss", "last_batch_accept_rate"), rows)
    for mode in ("fixed", "windowed"):
        far = [r[2] for r in rows if r[1] == mode]
        print(f"{mode}: median FAR {np.median(far):.3f}")


if __name__ == "__main__":
    main()
