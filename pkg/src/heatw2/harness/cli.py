"""Command line entry point: sample, w2, bound, experiment, fit."""
from __future__ import annotations

import argparse
import json
import sys

from ..core import Domain, PointConfiguration, ReferenceMeasure, RngStream
from .config import ConfigError, PROCESSES, load_config

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


class UsageError(Exception):
    pass


def _reference(name: str) -> ReferenceMeasure:
    """``uniform-<domain>`` (e.g. uniform-square, uniform-disk) or ``equilibrium-<potential>``."""
    from ..processes import Potential, equilibrium_measure
    if name.startswith("equilibrium-"):
        kind = name[len("equilibrium-"):]
        if kind == "ginibre":
            return equilibrium_measure(Potential.ginibre())
        if kind.startswith("elliptic-"):
            return equilibrium_measure(Potential.elliptic(float(kind[len("elliptic-"):])))
        raise UsageError(f"unknown reference {name!r}")
    if name.startswith("uniform-"):
        dom = name[len("uniform-"):]
        for cand in (dom, "unit-" + dom):
            try:
                return ReferenceMeasure.uniform(Domain.from_spec(cand))
            except ValueError:
                continue
    raise UsageError(f"unknown reference {name!r}")


def _domain(name: str) -> Domain:
    try:
        return Domain.from_spec(json.loads(name) if name.lstrip().startswith("{") else name)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_sample(args) -> None:
    from .experiment import sample_process
    domain = _domain(args.domain)
    param = args.intensity if args.intensity is not None else args.param
    if param is None:
        raise UsageError("give --intensity (or --param)")
    stream = RngStream(args.seed, args.index)
    pts, _ = sample_process(args.process, param, domain, stream)
    meta = {"process": args.process, "params": {"param": param, "domain": domain.to_dict()},
            "seed": args.seed, "stream": args.index}
    pts.to_csv(args.out, meta)
    print(json.dumps({"out": str(args.out), "n_points": pts.n}))


def cmd_w2(args) -> None:
    from ..transport import w2_semidiscrete
    pts = PointConfiguration.from_csv(args.points)
    res = w2_semidiscrete(pts, _reference(args.ref), args.resolution)
    print(json.dumps({"cost": res.cost, "quantization_bound": res.quantization_bound}, sort_keys=True))


def cmd_bound(args) -> None:
    from ..smoothing import certified_bound
    pts = PointConfiguration.from_csv(args.points)
    ref = _reference(args.ref)
    if ref.domain.kind != "box":
        raise UsageError("the smoothing bound needs a box reference domain")
    _, rep = certified_bound(pts, ref, ref.domain, args.c, (args.t_lo, args.t_hi), args.lambda_max)
    print(rep.to_json())


def cmd_experiment(args) -> None:
    from .experiment import run_experiment, summarize
    from .records import write_records
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        raise UsageError(str(exc)) from exc
    recs = run_experiment(cfg, workers=args.workers, timing=args.timing)
    out = args.out or cfg.output
    write_records(recs, out, cfg.to_dict())
    summary = {str(k): v for k, v in summarize(recs).items()}
    print(json.dumps({"out": str(out), "summary": summary}, sort_keys=True))
    if any(r.audit.get("error") for r in recs):
        raise ArithmeticError("some trials failed; see the audit sidecar")


def cmd_fit(args) -> None:
    from .fit import fit_rate
    from .records import read_records
    try:
        recs = read_records(args.inp)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    print(fit_rate(recs, args.model).to_json())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="heatw2", description="W2 of point processes and heat-smoothing bounds")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="write one configuration as CSV")
    s.add_argument("--process", required=True, choices=PROCESSES)
    s.add_argument("--intensity", type=float)
    s.add_argument("--param", type=float)
    s.add_argument("--domain", default="unit-square")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--out", default="sample.csv")
    s.set_defaults(func=cmd_sample)

    w = sub.add_parser("w2", help="W2 between a CSV configuration and a reference measure")
    w.add_argument("--points", required=True)
    w.add_argument("--ref", required=True)
    w.add_argument("--resolution", type=int, default=128)
    w.set_defaults(func=cmd_w2)

    b = sub.add_parser("bound", help="smoothing bound for a CSV configuration")
    b.add_argument("--points", required=True)
    b.add_argument("--ref", default="uniform-square")
    b.add_argument("--c", type=float, default=1.0)
    b.add_argument("--t-lo", type=float, default=1e-5)
    b.add_argument("--t-hi", type=float, default=1.0)
    b.add_argument("--lambda-max", type=float, default=None)
    b.set_defaults(func=cmd_bound)

    e = sub.add_parser("experiment", help="run a full grid from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--timing", action="store_true", help="fill the ms column (breaks byte-identical reruns)")
    e.set_defaults(func=cmd_experiment)

    f = sub.add_parser("fit", help="fit the W2 decay exponent from a records CSV")
    f.add_argument("--in", dest="inp", required=True)
    f.add_argument("--model", choices=("pure-power", "sqrt-log"), default="pure-power")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"heatw2: error: {exc}\n")
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, ValueError, OSError) as exc:
        sys.stderr.write(f"heatw2: numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
