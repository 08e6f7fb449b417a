"""Batch execution of one experiment config, with deterministic CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .center import SolverOptions, asymptotic_center, orbit_sample, radius_gate
from .config import (
    CenterParams,
    ConfigError,
    ExperimentConfig,
    StepsConfig,
    SuiteParams,
    parse_config,
)
from .iterate import IterationTrace, StepSchedule, picard, schu
from .operators import OperatorSpec, build_operator
from .space import Vec, dist, set_from_json
from .verify import (
    SuiteReport,
    closedness_demo,
    demiclosedness_demo,
    lemma22_suite,
    lemma36_suite,
    locality_suite,
    opial_demo,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2
OUT_ENV = "FIXPOINT_LAB_OUT"

TRACE_COLUMNS = ("n", "residual", "step_gamma", "dist_to_final")
CENTER_COLUMNS = ("operator", "burn_in", "window", "radius", "iterations", "certified_gap")
GATE_COLUMNS = CENTER_COLUMNS + ("r", "passes")
SUITE_COLUMNS = ("suite_name", "seed", "cases_run", "max_violation", "tolerance", "passed")


@dataclass
class RunResult:
    status: int
    outputs: list[Path] = field(default_factory=list)
    summary: str = ""
    payload: dict = field(default_factory=dict)


def fmt(x) -> str:
    """17 significant digits for floats so CSV values round-trip."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def resolve_output(cfg: ExperimentConfig, override: Optional[str] = None) -> Path:
    name = override or cfg.output.path or f"{cfg.run}.{cfg.output.format}"
    path = Path(name)
    if not path.is_absolute():
        base = os.environ.get(OUT_ENV)
        if base:
            path = Path(base) / path
    return path


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------


def make_operator(cfg: ExperimentConfig) -> OperatorSpec:
    return build_operator(cfg.operator.name, cfg.operator.params, cfg.space.dimension, cfg.space.p_exp)


def make_start(op: OperatorSpec, q0: Optional[list[float]]) -> Vec:
    coords = list(q0) if q0 is not None else [0.5]
    if len(coords) > op.dim:
        raise ConfigError([("run_params.q0", f"has {len(coords)} entries, dimension is {op.dim}")])
    v = Vec(coords + [0.0] * (op.dim - len(coords)), op.p)
    if not op.domain.contains(v):
        raise ConfigError([("run_params.q0", "start lies outside the operator domain")])
    return v


def make_steps(sc: StepsConfig) -> StepSchedule:
    if sc.kind == "constant":
        return StepSchedule.constant(sc.gamma)
    return StepSchedule.summable(sc.c, sc.b)


def trace_rows(trace: IterationTrace):
    final = trace.final
    for k, (q, r) in enumerate(zip(trace.iterates, trace.residuals)):
        gamma = trace.steps[k] if k < len(trace.steps) else ""
        yield (k + 1, r, gamma, dist(q, final))


def trace_json(trace: IterationTrace, full: bool) -> dict:
    out = {
        "scheme": trace.scheme,
        "stop_reason": trace.stop_reason.value,
        "residuals": trace.residuals,
        "steps": trace.steps,
        "final": trace.final.to_list(),
    }
    if full:
        out["iterates"] = [q.to_list() for q in trace.iterates]
    return out


def _run_trace(cfg: ExperimentConfig, params, op: OperatorSpec, out: Path, full: bool) -> RunResult:
    q0 = make_start(op, params.q0)
    if cfg.run == "schu":
        if not op.domain.convex:
            raise ConfigError([("operator.params", "schu needs a convex domain (set restrict_to_ball)")])
        trace = schu(op, q0, make_steps(params.steps), params.tol, params.max_iter, params.stop_at_tol)
    else:
        trace = picard(op, q0, params.tol, params.max_iter, params.stop_at_tol)
    if cfg.output.format == "csv":
        text = _csv_text(TRACE_COLUMNS, trace_rows(trace))
    else:
        text = _json_text(trace_json(trace, full))
    _write(out, text)
    status = EXIT_OK if trace.converged else EXIT_FAILED
    summary = (f"{cfg.run} on {op.name}: {len(trace.iterates)} iterates, "
               f"final residual {trace.residuals[-1]:.3e}, {trace.stop_reason.value}")
    return RunResult(status, [out], summary, trace_json(trace, False))


def _run_center(cfg: ExperimentConfig, params: CenterParams, op: OperatorSpec, out: Path) -> RunResult:
    q0 = make_start(op, params.q0)
    sample = orbit_sample(op, q0, params.burn_in, params.window)
    Q = set_from_json(params.domain) if params.domain else op.domain
    solver = SolverOptions(params.solver.step0, params.solver.iters, params.solver.tol)
    row = [op.name, params.burn_in, params.window]
    if cfg.run == "center":
        res = asymptotic_center(sample, Q, solver)
        payload = res.to_json()
        payload["flagged"] = res.certified_gap > solver.tol
        row += [res.radius, res.iterations, res.certified_gap]
        columns, status = CENTER_COLUMNS, EXIT_OK
        summary = f"center of {op.name} orbit tail: radius {res.radius:.6g} (gap {res.certified_gap:.2e})"
    else:
        r = params.r if params.r is not None else op.radius
        gate = radius_gate(sample, Q, r, solver)
        payload = gate.to_json()
        payload["r"] = r
        res = gate.center
        row += [res.radius, res.iterations, res.certified_gap, r, gate.passes]
        columns = GATE_COLUMNS
        status = EXIT_OK if gate.passes else EXIT_FAILED
        summary = f"gate on {op.name}: rho_hat {gate.rho_hat:.6g} {'<' if gate.passes else '>='} r = {r:g}"
    if cfg.output.format == "csv":
        _write(out, _csv_text(columns, [row]))
    else:
        _write(out, _json_text(payload))
    return RunResult(status, [out], summary, payload)


def _suite_once(cfg: ExperimentConfig, params: SuiteParams, seed: int) -> SuiteReport:
    op = make_operator(cfg)
    name = params.name
    if name == "lemma22":
        return lemma22_suite(params.dim, params.samples, seed)
    if name == "opial":
        return opial_demo(params.dim, [Vec(c) for c in params.candidates])
    if name == "locality":
        return locality_suite(op, params.ns, params.samples, seed)
    q0 = make_start(op, params.q0)
    if name == "closedness":
        trace = picard(op, q0, params.tol, params.max_iter, stop_at_tol=False)
        fp_like = [q for q, r in zip(trace.iterates, trace.residuals) if r < params.tol]
        if not fp_like:
            raise ConfigError([("run_params", "the Picard run produced no approximate fixed points")])
        return closedness_demo(op, fp_like, params.tol)
    if name == "demiclosedness":
        trace = _suite_trace(op, q0, params)
        return demiclosedness_demo(op, trace, params.tol)
    if name == "lemma36":
        trace = _suite_trace(op, q0, params)
        tail = trace.iterates[len(trace.iterates) // 2:]
        return lemma36_suite(op, tail, params.ms)
    raise ConfigError([("run_params.name", f"unknown suite {name!r}")])


def _suite_trace(op: OperatorSpec, q0: Vec, params: SuiteParams) -> IterationTrace:
    if params.scheme == "schu":
        if not op.domain.convex:
            raise ConfigError([("operator.params", "schu needs a convex domain (set restrict_to_ball)")])
        return schu(op, q0, make_steps(params.steps), params.tol, params.max_iter)
    return picard(op, q0, params.tol, params.max_iter)


def _suite_worker(args) -> dict:
    data, seed = args
    cfg, params = parse_config(data)
    return _suite_once(cfg, params, seed).to_json()


def _run_suite(cfg: ExperimentConfig, params: SuiteParams, out: Path, jobs: int,
               raw: dict) -> RunResult:
    seeded = params.name in ("lemma22", "locality")
    seeds = (params.seeds or [cfg.seed]) if seeded else [cfg.seed]
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_suite_worker, [(raw, s) for s in seeds]))
    else:
        reports = [_suite_once(cfg, params, s).to_json() for s in seeds]
    passed = all(r["passed"] for r in reports)
    if cfg.output.format == "csv":
        rows = [(r["suite_name"], s, r["cases_run"], r["max_violation"], r["tolerance"], r["passed"])
                for s, r in zip(seeds, reports)]
        _write(out, _csv_text(SUITE_COLUMNS, rows))
    else:
        _write(out, _json_text({"passed": passed, "seeds": seeds, "reports": reports}))
    table = summary_table(seeds, reports)
    return RunResult(EXIT_OK if passed else EXIT_FAILED, [out], table, {"passed": passed, "reports": reports})


def summary_table(seeds, reports) -> str:
    lines = [f"{'suite':<16}{'seed':>8}{'cases':>8}{'max_violation':>16}  verdict"]
    for s, r in zip(seeds, reports):
        lines.append(f"{r['suite_name']:<16}{s:>8}{r['cases_run']:>8}{r['max_violation']:>16.3e}  "
                     f"{'PASS' if r['passed'] else 'FAIL'}")
    return "\n".join(lines)


def run_experiment(data: dict, out: Optional[str] = None, seed: Optional[int] = None,
                   full: Optional[bool] = None, jobs: int = 1) -> RunResult:
    """Validate ``data``, run it, write artifacts; the status follows the 0/1/2 exit contract."""
    data = dict(data)
    if seed is not None:
        data["seed"] = seed
    if full is not None:
        data["output"] = {**data.get("output", {}), "full": full}
    try:
        cfg, params = parse_config(data)
        op = make_operator(cfg)
        path = resolve_output(cfg, out)
        if cfg.run in ("picard", "schu"):
            return _run_trace(cfg, params, op, path, cfg.output.full)
        if cfg.run in ("center", "gate"):
            return _run_center(cfg, params, op, path)
        return _run_suite(cfg, params, path, jobs, data)
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, summary=f"config error: {exc}")
    except (KeyError, ValueError) as exc:
        return RunResult(EXIT_CONFIG, summary=f"error: {exc}")
    except OSError as exc:
        return RunResult(EXIT_CONFIG, summary=f"cannot write output: {exc}")
