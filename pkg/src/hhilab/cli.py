"""Command-line front end: ``hhilab check | dump | converge``."""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .checks import Context, observed_order, run_check
from .config import CHECK_NAMES, FORMATS, ScenarioConfig, parse_config
from .errors import ConfigError
from .report import Report, emit_report


def _threads():
    """Cap BLAS threads at ``HC_THREADS`` if set."""
    value = os.environ.get("HC_THREADS")
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError:
        print(f"ignoring HC_THREADS={value!r}: not an integer", file=sys.stderr)
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, n))


def load_config(path) -> ScenarioConfig:
    return ScenarioConfig() if path is None else parse_config(path)


def run_scenario(config: ScenarioConfig, *, label: str = "", ctx: Context | None = None) -> Report:
    """Run the configured checks in declared order."""
    ctx = Context(config) if ctx is None else ctx
    results = [run_check(name, ctx) for name in config.checks]
    return Report(config.to_dict(), results, label=label)


def write_dumps(config: ScenarioConfig, ctx: Context, out: Path, what, stride: int = 1) -> list:
    from .calderon import assemble_calderon_closed_form
    from .dumps import dump_blocks, dump_eigenvalues, dump_kernel

    paths = []
    if "eigenvalues" in what:
        paths.append(dump_eigenvalues(ctx.spec, out / "eigenvalues.csv"))
    if "kernel" in what:
        b = ctx.beta
        paths.append(dump_kernel(ctx.spec, b, [0.0, 0.25 * b, 0.5 * b], out / "kernel.csv", stride=stride))
    if "blocks" in what:
        d = assemble_calderon_closed_form(ctx.model, ctx.spec, ctx.beta)
        paths.append(dump_blocks(d, out / "blocks.csv", stride=stride))
    return paths


def _requested_dumps(config: ScenarioConfig):
    o = config.output
    return [name for name, flag in (("blocks", o.dump_blocks), ("kernel", o.dump_kernel),
                                    ("eigenvalues", o.dump_eigenvalues)) if flag]


def cmd_check(args) -> int:
    config = load_config(args.config)
    fmt = args.format or config.output.format
    out = Path(args.out or config.output.dir)
    if args.only:
        config = config.replace(checks=tuple(args.only))
    ctx = Context(config)
    report = run_scenario(config, ctx=ctx)
    emit_report(report, out, fmt)
    dumps = _requested_dumps(config)
    if dumps:
        write_dumps(config, ctx, out, dumps)
    sys.stdout.write(report.to_human())
    return 0 if report.passed else 1


def cmd_dump(args) -> int:
    config = load_config(args.config)
    out = Path(args.out or config.output.dir)
    what = args.what or ["eigenvalues"]
    for p in write_dumps(config, Context(config), out, what, stride=args.stride):
        print(p)
    return 0


def richardson_order(values):
    """Order from three successive levels with unknown limit, or ``None``."""
    v0, v1, v2 = values
    d1, d2 = v0 - v1, v1 - v2
    if d1 == 0 or d2 == 0 or np.sign(d1) != np.sign(d2):
        return None
    return float(np.log2(d1 / d2))


def cmd_converge(args) -> int:
    """Rerun the checks with ``N_tau`` doubled per level and fit orders."""
    config = load_config(args.config)
    fmt = args.format or config.output.format
    out = Path(args.out or config.output.dir)
    levels = args.refine_levels if args.refine_levels is not None else config.run.refine_levels
    if levels < 1:
        print("--refine-levels must be >= 1", file=sys.stderr)
        return 2
    reports = []
    ok = True
    for k in range(levels):
        run = dataclasses.replace(config.run, N_tau=config.run.N_tau * 2**k, fd_cap=config.run.fd_cap * 2**k)
        cfg = config.replace(run=run)
        rep = run_scenario(cfg, label=f"level {k} N_tau={run.N_tau}")
        ok &= rep.passed
        reports.append(rep)

    fits = []
    for i, name in enumerate(config.checks):
        per_level = [r.results[i] for r in reports]
        n_rec = min(len(r.records) for r in per_level)
        for j in range(n_rec):
            vals = [r.records[j].value for r in per_level]
            entry = {"check": name, "quantity": per_level[0].records[j].quantity, "values": vals}
            if len(vals) >= 2 and all(v > 0 for v in vals):
                entry["pairwise_orders"] = observed_order(vals)
            if len(vals) >= 3:
                entry["richardson_order"] = richardson_order(vals[-3:])
            fits.append(entry)
    for k, rep in enumerate(reports):
        if k == len(reports) - 1:
            rep.extra.append({"name": "convergence", "data": fits})
        emit_report(rep, out, fmt, stem=f"report_level{k}")
        sys.stdout.write(rep.to_human())
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hhilab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="TOML scenario file (defaults if omitted)")
        sp.add_argument("--out", type=Path, help="output directory")

    c = sub.add_parser("check", help="run the check suite")
    common(c)
    c.add_argument("--format", choices=FORMATS)
    c.add_argument("--only", nargs="+", choices=CHECK_NAMES, metavar="CHECK", help="run only these checks")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("dump", help="write CSV dumps")
    common(d)
    d.add_argument("--what", nargs="+", choices=("blocks", "kernel", "eigenvalues"))
    d.add_argument("--stride", type=int, default=1, help="node stride for matrix dumps")
    d.set_defaults(func=cmd_dump)

    v = sub.add_parser("converge", help="refinement study in N_tau")
    common(v)
    v.add_argument("--format", choices=FORMATS)
    v.add_argument("--refine-levels", type=int, dest="refine_levels")
    v.set_defaults(func=cmd_converge)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _threads():
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
