"""Command-line front end.

Subcommands: run, compare, sweep, inspect, selftest, flops.  Exit codes
are part of the interface: 0 success, 1 config or usage error, 2 run
divergence (the partial CSV is still written), 3 selftest failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import linalg, selftest
from .errors import ConfigError, DivergenceError, PionError
from .harness import (
    RunConfig,
    Schedule,
    compare,
    config_parse,
    csv_write,
    lr_sweep,
    run,
    summary_csv_write,
)
from .optim import BaselineConfig, PionConfig, flop_estimate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_SELFTEST = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors (exit 1)
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pion", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_run = sub.add_parser("run", parents=[], help="run one config, write metrics CSV")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    p_cmp = sub.add_parser("compare", help="run several configs, write summary CSV")
    p_cmp.add_argument("--config", action="append", required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    p_swp = sub.add_parser("sweep", help="sweep widths and lrs, write summary CSV")
    p_swp.add_argument("--config", required=True)
    p_swp.add_argument("--out", required=True)
    p_swp.add_argument("--widths", required=True, help="comma-separated widths")
    p_swp.add_argument("--lrs", required=True, help="comma-separated learning rates")
    p_swp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")

    p_ins = sub.add_parser("inspect", help="print spectrum diagnostics of a matrix CSV")
    p_ins.add_argument("matrix_csv")

    p_st = sub.add_parser("selftest", help="run the invariant suites")
    p_st.add_argument("--suite", action="append", default=[], choices=list(selftest.SUITES))

    p_fl = sub.add_parser("flops", help="print the update-cost breakdown")
    p_fl.add_argument("--d-out", type=int, required=True)
    p_fl.add_argument("--d-in", type=int, required=True)
    p_fl.add_argument("--batch-tokens", type=int, default=1)
    p_fl.add_argument("--alternating", action="store_true")
    p_fl.add_argument("--no-rms", action="store_true")
    return parser


def _parse_override_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare strings like exp_scheme=cayley


def _apply_overrides(cfg: RunConfig, pairs: list[str]) -> RunConfig:
    """Apply key=value pairs onto a parsed config.

    Keys may be dotted paths (optimizer.lr, problem.seed, lr_schedule.kind)
    or bare field names, which are resolved against the run config, the
    optimizer, the schedule, and the problem parameters, in that order.
    """
    from dataclasses import replace

    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not KEY=VALUE")
        key, raw = pair.split("=", 1)
        value = _parse_override_value(raw)
        parts = key.split(".")
        if len(parts) == 1:
            name = parts[0]
            if name in RunConfig.__dataclass_fields__ and name not in (
                "problem",
                "optimizer",
                "lr_schedule",
            ):
                cfg = replace(cfg, **{name: value})
            elif name in type(cfg.optimizer).__dataclass_fields__:
                cfg = replace(cfg, optimizer=replace(cfg.optimizer, **{name: value}))
            elif name in Schedule.__dataclass_fields__:
                cfg = replace(cfg, lr_schedule=replace(cfg.lr_schedule, **{name: value}))
            elif name == "seed" or name in cfg.problem.params:
                params = dict(cfg.problem.params)
                params[name] = value
                cfg = replace(cfg, problem=replace(cfg.problem, params=params))
            else:
                raise ConfigError(f"override names unknown field {name!r}")
        elif len(parts) == 2:
            section, name = parts
            if section == "optimizer":
                if name not in type(cfg.optimizer).__dataclass_fields__:
                    raise ConfigError(f"override names unknown field {key!r}")
                cfg = replace(cfg, optimizer=replace(cfg.optimizer, **{name: value}))
            elif section == "lr_schedule":
                if name not in Schedule.__dataclass_fields__:
                    raise ConfigError(f"override names unknown field {key!r}")
                cfg = replace(cfg, lr_schedule=replace(cfg.lr_schedule, **{name: value}))
            elif section == "problem":
                if name == "seed":
                    cfg = replace(cfg, problem=replace(cfg.problem, seed=int(value)))
                else:
                    params = dict(cfg.problem.params)
                    params[name] = value
                    cfg = replace(cfg, problem=replace(cfg.problem, params=params))
            else:
                raise ConfigError(f"override names unknown section {section!r}")
        else:
            raise ConfigError(f"override key {key!r} is too deep")
    return cfg


def _load_config(path: str, overrides: list[str]) -> RunConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}")
    return _apply_overrides(config_parse(text), overrides)


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, args.set)
    try:
        record = run(cfg)
    except DivergenceError as exc:
        csv_write(exc.record, args.out)
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    csv_write(record, args.out)
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfgs = [_load_config(path, args.set) for path in args.config]
    ids = [_stem(path) for path in args.config]
    table = compare(cfgs, config_ids=ids)
    summary_csv_write(table.config_ids, table.widths, table.lrs, table.summaries, args.out)
    if any(s.diverged for s in table.summaries):
        print("at least one run diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _stem(path: str) -> str:
    import os

    return os.path.splitext(os.path.basename(path))[0]


def _parse_list(text: str, convert, what: str) -> list:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError(f"empty {what} list")
    try:
        return [convert(t) for t in items]
    except ValueError as exc:
        raise ConfigError(f"bad {what} list: {exc}")


def _cmd_sweep(args) -> int:
    base = _load_config(args.config, args.set)
    widths = _parse_list(args.widths, int, "widths")
    lrs = _parse_list(args.lrs, float, "lrs")
    grid = lr_sweep(widths, lrs, base)
    ids, gw, glr, summaries = [], [], [], []
    for wi, w in enumerate(grid.widths):
        for li, lr in enumerate(grid.lrs):
            ids.append(grid.config_ids[wi][li])
            gw.append(w)
            glr.append(lr)
            summaries.append(grid.summaries[wi][li])
    summary_csv_write(ids, gw, glr, summaries, args.out)
    for w, best in zip(grid.widths, grid.argmin_lr):
        print(f"width {w}: best lr {best:g}")
    if any(s.diverged for s in summaries):
        return EXIT_DIVERGED
    return EXIT_OK


def _read_matrix_csv(path: str) -> np.ndarray:
    with open(path, "r") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ConfigError("empty matrix file")
    head = lines[0].split(",")
    if len(head) != 2:
        raise ConfigError("first line must be 'rows,cols'")
    try:
        rows, cols = int(head[0]), int(head[1])
        values = [float(tok) for ln in lines[1:] for tok in ln.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad matrix file: {exc}")
    if rows < 1 or cols < 1 or len(values) != rows * cols:
        raise ConfigError(
            f"expected {rows}x{cols} = {rows * cols} values, got {len(values)}"
        )
    return np.array(values).reshape(rows, cols)


def _cmd_inspect(args) -> int:
    a = _read_matrix_csv(args.matrix_csv)
    sv = linalg.singular_values(a)
    print(f"shape: {a.shape[0]}x{a.shape[1]}")
    print("singular_values:", ",".join(f"{v:.12g}" for v in sv))
    print(f"frobenius_norm: {linalg.frobenius_norm(a):.12g}")
    if a.shape[0] == a.shape[1]:
        n = a.shape[0]
        orth = linalg.frobenius_norm(a.T @ a - np.eye(n))
        print(f"orthogonality_error: {orth:.12g}")
        print(f"skew_error: {linalg.skew_error(a):.12g}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    results = selftest.run_suites(args.suite or None)
    failed = 0
    for suite, checks in results.items():
        ok = all(c.passed for c in checks)
        n_fail = sum(not c.passed for c in checks)
        failed += n_fail
        status = "PASS" if ok else "FAIL"
        print(f"{suite}: {status} ({len(checks) - n_fail}/{len(checks)} checks)")
        for c in checks:
            if not c.passed:
                print(f"  {c.name}: {c.detail}", file=sys.stderr)
    return EXIT_OK if failed == 0 else EXIT_SELFTEST


def _cmd_flops(args) -> int:
    cfg = PionConfig(
        update_mode="alternating" if args.alternating else "bilateral",
        rms_enabled=not args.no_rms,
    )
    est = flop_estimate(args.d_out, args.d_in, args.batch_tokens, cfg)
    print(f"lie_gradient: {est.lie_gradient:.0f}")
    print(f"rms_scaling: {est.rms_scaling:.0f}")
    print(f"update_apply: {est.update_apply:.0f}")
    print(f"update_side_dominant: {est.update_side_dominant:.0f}")
    print(f"total: {est.total:.0f}")
    print(f"relative_overhead: {est.relative_overhead:.6g}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "compare": _cmd_compare,
        "sweep": _cmd_sweep,
        "inspect": _cmd_inspect,
        "selftest": _cmd_selftest,
        "flops": _cmd_flops,
    }
    try:
        return handlers[args.subcommand](args)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except PionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
