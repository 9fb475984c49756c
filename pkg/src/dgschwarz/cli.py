"""Command-line entry point: ``dgschwarz --experiment {cond,model,hjb}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, dump_config, load_config
from .experiments import (TABLE1, TABLE1_GOLDEN, TABLE2, SweepResult, Table1Result,
                          run_experiment_1, run_experiment_2, run_experiment_3)

log = logging.getLogger("dgschwarz")


def _no_growth(values) -> bool:
    """No monotone increase over the last three entries."""
    v = list(values)[-3:]
    return len(v) < 3 or not (v[0] < v[1] < v[2])


def summarize_cond(res: Table1Result) -> dict:
    golden = {}
    for p, q in TABLE1_GOLDEN:
        k = res.kappa.get((p, q))
        golden[f"{p},{q}"] = {
            "kappa": k, "reference": TABLE1[(p, q)],
            "pass": k is not None and abs(k / TABLE1[(p, q)] - 1) <= 0.05,
        }
    p_rates = {str(q): {"slope": f.slope, "r2": f.r2, "pass": 5.6 <= f.slope <= 6.4} for q, f in res.p_rates.items()}
    q_rates = {str(p): {"slope": f.slope, "r2": f.r2, "pass": 2.6 <= f.slope <= 3.4}
               for p, f in res.q_rates.items() if p >= 10}
    return {
        "table1_golden": golden,
        "p_rates": p_rates,
        "q_rates": q_rates,
        "failed_cells": {f"{p},{q}": e for (p, q), e in res.errors.items()},
        "pass": all(g["pass"] for g in golden.values()) and all(r["pass"] for r in p_rates.values())
        and all(r["pass"] for r in q_rates.values()),
    }


def summarize_model(res: SweepResult) -> dict:
    out = {"columns": {}}
    ok = True
    for col in ("nonoverlap2", "overlap2"):
        rows = [n for n in res.rows() if 8 <= n <= 128 and (n, col) in res.cells]
        counts = {f"1/{n}": res.cells[(n, col)].iterations for n in rows}
        within = all(c is not None and abs(c - TABLE2[n][col]) <= 3
                     for n, c in zip(rows, counts.values()))
        bounded = _no_growth(counts.values())
        out["columns"][col] = {"iterations": counts, "within_3": within, "bounded": bounded}
        ok &= within and bounded
    out["pass"] = ok
    return out


def summarize_hjb(res: SweepResult) -> dict:
    steps_ok = all(c.newton_steps is not None and c.newton_steps <= 8 and c.converged
                   for c in res.cells.values() if not c.failure)
    col = [(n, res.cells[(n, "nonoverlap2")].iterations) for n in res.rows()
           if 16 <= n <= 64 and (n, "nonoverlap2") in res.cells]
    avg_ok = all(v is not None and 10 <= v <= 35 for _, v in col)
    vals = [v for _, v in col]
    growth_ok = bool(vals) and _no_growth(vals) and vals[-1] <= vals[0]
    return {
        "newton_steps_le_8": steps_ok,
        "nonoverlap2_average_gmres": {f"1/{n}": v for n, v in col},
        "average_in_range": avg_ok,
        "no_growth": growth_ok,
        "pass": steps_ok and avg_ok and growth_ok,
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dgschwarz", description=__doc__)
    ap.add_argument("--experiment", choices=("cond", "model", "hjb"), required=True)
    ap.add_argument("--config", type=Path, help="key = value configuration file")
    ap.add_argument("--output", type=Path, help="output directory (overrides the config)")
    ap.add_argument("--max-refinement", type=int, help="largest k with h = 2^-k")
    ap.add_argument("--include-large", action="store_true", help="also run h = 1/256")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    cfg = load_config(args.config, args.experiment) if args.config else ExperimentConfig.defaults(args.experiment)
    if args.max_refinement is not None:
        cfg.max_refinement = args.max_refinement
    if args.include_large:
        cfg.max_refinement = max(cfg.max_refinement, 8)
    if args.output is not None:
        cfg.output = str(args.output)
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{cfg.experiment}.cfg").write_text(dump_config(cfg))

    if cfg.experiment == "cond":
        res = run_experiment_1(cfg)
        qs = list(range(cfg.q_min, cfg.q + 1))
        res.to_csv(out / "table1.csv", list(range(cfg.p_min, cfg.p + 1)), qs)
        summary = summarize_cond(res)
        complete = not res.errors
    else:
        res = run_experiment_2(cfg) if cfg.experiment == "model" else run_experiment_3(cfg)
        name = "table2" if cfg.experiment == "model" else "table3"
        res.to_csv(out / f"{name}.csv", cfg.columns, newton=cfg.experiment == "hjb")
        res.timings_csv(out / f"{name}_timings.csv", cfg.columns)
        summary = summarize_model(res) if cfg.experiment == "model" else summarize_hjb(res)
        failed = {f"1/{n},{c}": cell.failure for (n, c), cell in res.cells.items() if cell.failure}
        summary["failed_cells"] = failed
        complete = not failed
    summary["experiment"] = cfg.experiment
    (out / f"{cfg.experiment}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"experiment": cfg.experiment, "pass": summary["pass"], "output": str(out)}))
    return 0 if complete else 1


if __name__ == "__main__":
    sys.exit(main())
