"""Experiment runner: deterministic runs, comparisons, sweeps, CSV output.

A run is fully described by a :class:`RunConfig`; identical configs
(including seeds) produce bit-identical metrics CSVs.  Each run records a
step-0 baseline row, one row per parameter every ``record_every`` steps,
and the final step.  A loss that turns non-finite or exceeds the
divergence threshold raises :class:`~pion.errors.DivergenceError` carrying
everything recorded so far, so callers can persist the partial record.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, DivergenceError, NonFiniteError, ParseError
from .manifold import capture_spectrum, spectrum_drift, stationarity_measure
from .optim import (
    BaselineConfig,
    PionConfig,
    baseline_init,
    baseline_step,
    pion_init,
    pion_step,
)
from .problems import Problem, least_squares, mlp, procrustes

DIVERGENCE_THRESHOLD = 1e12

METRICS_HEADER = (
    "step,loss,param_id,update_fro_over_eta,spectrum_drift,"
    "stationarity,weight_fro,alpha"
)
SUMMARY_HEADER = "config_id,width,lr,final_loss,min_stationarity,max_drift,diverged"


@dataclass(frozen=True)
class ProblemSpec:
    """Name, keyword parameters, and data seed of a problem instance."""

    name: str
    params: dict
    seed: int


@dataclass(frozen=True)
class Schedule:
    """Learning-rate schedule: constant, or cosine decay to a floor."""

    kind: str = "constant"
    floor_fraction: float = 0.01

    def __post_init__(self):
        if self.kind not in ("constant", "cosine"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 < self.floor_fraction <= 1.0:
            raise ConfigError(
                f"floor_fraction must lie in (0, 1], got {self.floor_fraction}"
            )

    def lr_at(self, base_lr: float, step: int, total_steps: int) -> float:
        if self.kind == "constant":
            return base_lr
        frac = 0.0 if total_steps <= 1 else (step - 1) / (total_steps - 1)
        floor = self.floor_fraction
        return base_lr * (floor + (1.0 - floor) * 0.5 * (1.0 + math.cos(math.pi * frac)))


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    optimizer: PionConfig | BaselineConfig
    steps: int
    record_every: int = 1
    lr_schedule: Schedule = field(default_factory=Schedule)
    seed: int = 0  # reserved for stochastic extensions; recorded, not consumed

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class Row:
    step: int
    loss: float
    param_id: int
    update_fro_over_eta: float
    spectrum_drift: float
    stationarity: float
    weight_fro: float
    alpha: float


@dataclass(frozen=True)
class RunSummary:
    final_loss: float
    min_stationarity: float
    max_drift: float
    wall_time: float
    diverged: bool = False


@dataclass(frozen=True)
class RunRecord:
    rows: list[Row]
    summary: RunSummary


_PROBLEM_BUILDERS = {
    "least_squares": (least_squares, ("d_out", "d_in", "n_samples")),
    "procrustes": (procrustes, ("d",)),
    "mlp": (mlp, ("widths", "depth", "n_samples")),
}


def validate_problem_spec(spec: ProblemSpec) -> None:
    """Check the problem name and parameter set without building the data."""
    if spec.name not in _PROBLEM_BUILDERS:
        raise ConfigError(f"unknown problem {spec.name!r}")
    _, names = _PROBLEM_BUILDERS[spec.name]
    unknown = set(spec.params) - set(names)
    if unknown:
        raise ConfigError(f"unknown problem parameters: {sorted(unknown)}")
    missing = set(names) - set(spec.params)
    if missing:
        raise ConfigError(f"missing problem parameters: {sorted(missing)}")


def build_problem(spec: ProblemSpec) -> Problem:
    validate_problem_spec(spec)
    builder, names = _PROBLEM_BUILDERS[spec.name]
    kwargs = {k: spec.params[k] for k in names}
    return builder(seed=spec.seed, **kwargs)


class _Stepper:
    """Uniform driver over the optimizer family and the baselines."""

    def __init__(self, optimizer, problem: Problem):
        self.optimizer = optimizer
        self.pion = isinstance(optimizer, PionConfig)
        if self.pion:
            self.states = [
                pion_init(s[0], s[1], w0, optimizer)
                for s, w0 in zip(problem.shapes, problem.initial_params)
            ]
            self.refs = [st.spectrum_ref for st in self.states]
        else:
            self.states = [baseline_init(s[0], s[1], optimizer) for s in problem.shapes]
            self.refs = [capture_spectrum(w0) for w0 in problem.initial_params]

    def step(self, idx: int, w, g, lr: float):
        """Returns (new_w, alpha) applying lr for this step."""
        opt = self.optimizer
        if lr != opt.lr:
            opt = replace(opt, lr=lr)
        if self.pion:
            w_next, report = pion_step(w, g, self.states[idx], opt)
            return w_next, report.alpha
        return baseline_step(w, g, self.states[idx], opt), 0.0


def run(cfg: RunConfig, _problem: Problem | None = None) -> RunRecord:
    """Execute one configured run and return its record.

    ``_problem`` substitutes a prebuilt problem for the config's spec; it
    exists for fault-injection tests and is not part of the public API.
    """
    problem = _problem if _problem is not None else build_problem(cfg.problem)
    params = [w.copy() for w in problem.initial_params]
    stepper = _Stepper(cfg.optimizer, problem)
    base_lr = cfg.optimizer.lr
    rows: list[Row] = []
    started = time.perf_counter()

    def record(step: int, loss: float, grads, updates, lr: float, alphas):
        for i, w in enumerate(params):
            rows.append(
                Row(
                    step=step,
                    loss=loss,
                    param_id=i,
                    update_fro_over_eta=updates[i] / lr if lr > 0 else 0.0,
                    spectrum_drift=spectrum_drift(w, stepper.refs[i]),
                    stationarity=stationarity_measure(w, grads[i]),
                    weight_fro=float(np.sqrt(np.sum(w * w))),
                    alpha=alphas[i],
                )
            )

    def finish(diverged: bool) -> RunRecord:
        per_step: dict[int, float] = {}
        for r in rows:
            per_step[r.step] = per_step.get(r.step, 0.0) + r.stationarity
        summary = RunSummary(
            final_loss=rows[-1].loss if rows else float("nan"),
            min_stationarity=min(per_step.values()) if per_step else float("nan"),
            max_drift=max((r.spectrum_drift for r in rows), default=float("nan")),
            wall_time=time.perf_counter() - started,
            diverged=diverged,
        )
        return RunRecord(rows=rows, summary=summary)

    loss0 = problem.loss(params)
    _check_loss(loss0, finish)
    grads = problem.gradients(params)
    record(0, loss0, grads, [0.0] * len(params), 1.0, [0.0] * len(params))

    for t in range(1, cfg.steps + 1):
        lr_t = cfg.lr_schedule.lr_at(base_lr, t, cfg.steps)
        updates, alphas = [], []
        try:
            for i in range(len(params)):
                w_next, alpha = stepper.step(i, params[i], grads[i], lr_t)
                updates.append(float(np.sqrt(np.sum((w_next - params[i]) ** 2))))
                alphas.append(alpha)
                params[i] = w_next
        except NonFiniteError as exc:
            raise DivergenceError(f"non-finite values at step {t}: {exc}", finish(True))
        loss = problem.loss(params)
        _check_loss(loss, finish, step=t)
        if t % cfg.record_every == 0 or t == cfg.steps:
            grads = problem.gradients(params)
            record(t, loss, grads, updates, lr_t, alphas)
        elif t < cfg.steps:
            grads = problem.gradients(params)
    return finish(False)


def _check_loss(loss: float, finish, step: int | None = None) -> None:
    if not math.isfinite(loss) or loss > DIVERGENCE_THRESHOLD:
        where = "at initialization" if step is None else f"at step {step}"
        raise DivergenceError(f"loss {loss!r} {where}", finish(True))


# ---------------------------------------------------------------------------
# Comparison and sweep


@dataclass(frozen=True)
class ComparisonTable:
    config_ids: list[str]
    steps: list[int]
    losses: list[list[float]]  # one column (list) per config
    summaries: list[RunSummary]
    widths: list[int]
    lrs: list[float]


def compare(cfgs: list[RunConfig], config_ids: list[str] | None = None) -> ComparisonTable:
    """Run several optimizers on one shared problem and align their losses."""
    if not cfgs:
        raise ConfigError("compare needs at least one config")
    first = cfgs[0].problem
    for c in cfgs[1:]:
        if c.problem != first:
            raise ConfigError("compare requires identical problem specs and seeds")
    ids = config_ids or [f"cfg{i}" for i in range(len(cfgs))]
    records = []
    for c in cfgs:
        try:
            records.append(run(c))
        except DivergenceError as exc:
            records.append(exc.record)
    common: list[int] | None = None
    for rec in records:
        steps = sorted({r.step for r in rec.rows})
        common = steps if common is None else [s for s in common if s in set(steps)]
    losses = []
    for rec in records:
        by_step = {r.step: r.loss for r in rec.rows}
        losses.append([by_step[s] for s in common])
    width = build_problem(first).width
    return ComparisonTable(
        config_ids=ids,
        steps=common,
        losses=losses,
        summaries=[r.summary for r in records],
        widths=[width] * len(cfgs),
        lrs=[c.optimizer.lr for c in cfgs],
    )


def _scale_problem(spec: ProblemSpec, width: int) -> ProblemSpec:
    params = dict(spec.params)
    if spec.name == "least_squares":
        params["d_out"] = width
        params["d_in"] = width
    elif spec.name == "procrustes":
        params["d"] = width
    elif spec.name == "mlp":
        params["widths"] = [width] * (params["depth"] + 1)
    else:
        raise ConfigError(f"cannot scale problem {spec.name!r}")
    return replace(spec, params=params)


@dataclass(frozen=True)
class SweepGrid:
    widths: list[int]
    lrs: list[float]
    final_losses: list[list[float]]  # [width_index][lr_index]
    argmin_lr: list[float]  # per width
    summaries: list[list[RunSummary]]
    config_ids: list[list[str]]


def lr_sweep(widths: list[int], lrs: list[float], base_cfg: RunConfig) -> SweepGrid:
    """Grid of final losses over (width, lr), plus the best lr per width.

    Cells run concurrently up to the PION_THREADS environment cap.
    """
    if not widths or not lrs:
        raise ConfigError("widths and lrs must be non-empty")
    cells = []
    for w in widths:
        spec = _scale_problem(base_cfg.problem, w)
        for lr in lrs:
            cells.append(
                replace(base_cfg, problem=spec, optimizer=replace(base_cfg.optimizer, lr=lr))
            )

    def one(cfg: RunConfig) -> RunRecord:
        try:
            return run(cfg)
        except DivergenceError as exc:
            return exc.record

    max_workers = int(os.environ.get("PION_THREADS", os.cpu_count() or 1))
    if max_workers < 1:
        raise ConfigError("PION_THREADS must be >= 1")
    if max_workers == 1:
        records = [one(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(one, cells))

    n_lr = len(lrs)
    losses, summaries, ids, argmin = [], [], [], []
    for wi, w in enumerate(widths):
        recs = records[wi * n_lr : (wi + 1) * n_lr]
        row = [
            float("inf") if r.summary.diverged else r.summary.final_loss for r in recs
        ]
        losses.append(row)
        summaries.append([r.summary for r in recs])
        ids.append([f"w{w}_lr{lr:g}" for lr in lrs])
        argmin.append(lrs[int(np.argmin(row))])
    return SweepGrid(
        widths=list(widths),
        lrs=list(lrs),
        final_losses=losses,
        argmin_lr=argmin,
        summaries=summaries,
        config_ids=ids,
    )


# ---------------------------------------------------------------------------
# Serialization


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def csv_write(record: RunRecord, path: str) -> None:
    """Write the metrics CSV: one row per (step, parameter), LF endings."""
    lines = [METRICS_HEADER]
    for r in record.rows:
        lines.append(
            f"{r.step},{_fmt(r.loss)},{r.param_id},{_fmt(r.update_fro_over_eta)},"
            f"{_fmt(r.spectrum_drift)},{_fmt(r.stationarity)},"
            f"{_fmt(r.weight_fro)},{_fmt(r.alpha)}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def summary_csv_write(
    config_ids: list[str],
    widths: list[int],
    lrs: list[float],
    summaries: list[RunSummary],
    path: str,
) -> None:
    lines = [SUMMARY_HEADER]
    for cid, w, lr, s in zip(config_ids, widths, lrs, summaries):
        lines.append(
            f"{cid},{w},{_fmt(lr)},{_fmt(s.final_loss)},{_fmt(s.min_stationarity)},"
            f"{_fmt(s.max_drift)},{str(s.diverged).lower()}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


_PION_FIELDS = {f: t for f, t in PionConfig.__dataclass_fields__.items()}
_BASELINE_FIELDS = {f: t for f, t in BaselineConfig.__dataclass_fields__.items()}


def _parse_section(raw: dict, fields: dict, cls, label: str):
    unknown = set(raw) - set(fields)
    if unknown:
        raise ParseError(f"unknown {label} field(s): {sorted(unknown)}")
    try:
        return cls(**raw)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ParseError(f"bad {label} section: {exc}")


def config_parse(text: str) -> RunConfig:
    """Parse a JSON run config; unknown fields are rejected by name."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    allowed = {"problem", "optimizer", "steps", "record_every", "lr_schedule", "seed"}
    unknown = set(doc) - allowed
    if unknown:
        raise ParseError(f"unknown config field(s): {sorted(unknown)}")
    for required in ("problem", "optimizer", "steps"):
        if required not in doc:
            raise ParseError(f"missing config field {required!r}")

    prob = doc["problem"]
    if not isinstance(prob, dict):
        raise ParseError("problem must be an object")
    unknown = set(prob) - {"name", "params", "seed"}
    if unknown:
        raise ParseError(f"unknown problem field(s): {sorted(unknown)}")
    for required in ("name", "seed"):
        if required not in prob:
            raise ParseError(f"missing problem field {required!r}")
    spec = ProblemSpec(
        name=prob["name"], params=dict(prob.get("params", {})), seed=int(prob["seed"])
    )
    validate_problem_spec(spec)

    opt_raw = dict(doc["optimizer"]) if isinstance(doc["optimizer"], dict) else None
    if opt_raw is None or "kind" not in opt_raw:
        raise ParseError("optimizer must be an object with a 'kind' field")
    kind = opt_raw.pop("kind")
    if kind == "pion":
        optimizer = _parse_section(opt_raw, _PION_FIELDS, PionConfig, "optimizer")
    elif kind in ("sgd", "adamw", "muon"):
        optimizer = _parse_section(
            {"kind": kind, **opt_raw}, _BASELINE_FIELDS, BaselineConfig, "optimizer"
        )
    else:
        raise ParseError(f"unknown optimizer kind {kind!r}")

    sched_raw = doc.get("lr_schedule", {"kind": "constant"})
    if not isinstance(sched_raw, dict):
        raise ParseError("lr_schedule must be an object")
    unknown = set(sched_raw) - {"kind", "floor_fraction"}
    if unknown:
        raise ParseError(f"unknown lr_schedule field(s): {sorted(unknown)}")
    try:
        schedule = Schedule(**sched_raw)
    except TypeError as exc:
        raise ParseError(f"bad lr_schedule section: {exc}")

    return RunConfig(
        problem=spec,
        optimizer=optimizer,
        steps=int(doc["steps"]),
        record_every=int(doc.get("record_every", 1)),
        lr_schedule=schedule,
        seed=int(doc.get("seed", 0)),
    )


def config_serialize(cfg: RunConfig) -> str:
    """Inverse of :func:`config_parse` up to config equality."""
    if isinstance(cfg.optimizer, PionConfig):
        opt = {"kind": "pion", **asdict(cfg.optimizer)}
    else:
        opt = asdict(cfg.optimizer)
    doc = {
        "problem": {
            "name": cfg.problem.name,
            "params": cfg.problem.params,
            "seed": cfg.problem.seed,
        },
        "optimizer": opt,
        "steps": cfg.steps,
        "record_every": cfg.record_every,
        "lr_schedule": {
            "kind": cfg.lr_schedule.kind,
            "floor_fraction": cfg.lr_schedule.floor_fraction,
        },
        "seed": cfg.seed,
    }
    return json.dumps(doc, indent=2)
