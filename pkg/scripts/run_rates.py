"""Run rate experiments from JSON configs, write records and print the fitted exponents.

    python scripts/run_rates.py scripts/configs/ginibre_rate.json scripts/configs/gaf_rate.json
"""
import argparse
import json
import sys
import time
from pathlib import Path

from heatw2.harness import fit_rate, load_config, run_experiment, summarize, write_records


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--trials", type=int, help="override the trial count (quick looks)")
    args = ap.parse_args(argv)
    for path in args.configs:
        cfg = load_config(path)
        if args.trials:
            cfg = type(cfg)(**{**cfg.__dict__, "trials": args.trials})
        out = Path(cfg.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        recs = run_experiment(cfg, workers=args.workers)
        write_records(recs, out, cfg.to_dict())
        summary = summarize(recs)
        line = {"config": path, "out": str(out), "seconds": round(time.perf_counter() - t0, 1),
                "errors": sum(s["errors"] for s in summary.values())}
        for model in ("pure-power", "sqrt-log"):
            try:
                line[model] = json.loads(fit_rate(recs, model, min_trials=min(8, cfg.trials)).to_json())
            except ValueError as exc:
                line[model] = str(exc)
        print(json.dumps(line, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
