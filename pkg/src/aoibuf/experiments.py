"""Pipelines behind the CLI: error curves, dual solves, simulations, sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from .aoi import TransitionModel, is_valid
from .config import ExperimentConfig, parse_grid
from .dual import DualEvaluator, DualSolveReport, SensorProblem, dual_ascent
from .mdp import QTable, dump_q_csv
from .scheduling import (
    PolicyKind, SimResult, build_tables, fmt, result_header, result_row, simulate,
)
from .source import ArSourceModel, mmse_error, yule_walker_autocovariance

log = logging.getLogger(__name__)

REPORT_NAME = "solve_report.json"
DIGEST_NAME = "solve_report.digest"


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


# -- error curve -------------------------------------------------------------


def error_curve(
    model: ArSourceModel, buffer: int, delta_max: int, fixed_ages: Sequence[int] = ()
) -> tuple[list[str], list[list[str]]]:
    """Error as a function of the freshest age, older ages held fixed.

    For ``buffer == 1`` the rows are ``(delta_1, error)``.  Otherwise a
    ``error_b1`` column carries the single-packet curve for comparison and
    ``error`` is blank wherever ``delta_1`` cannot precede ``fixed_ages``.
    """
    fixed = tuple(int(a) for a in fixed_ages)
    if buffer < 1:
        raise ValueError("buffer must be >= 1")
    if len(fixed) != buffer - 1:
        raise ValueError(f"buffer {buffer} needs {buffer - 1} fixed older age(s), got {len(fixed)}")
    if fixed and not (fixed[0] >= 2 and is_valid(fixed, delta_max)):
        raise ValueError(
            f"fixed ages {fixed} must be increasing, start at 2 or more and stay <= {delta_max}"
        )
    table = yule_walker_autocovariance(model, max(model.order, delta_max))
    rows = []
    for d in range(1, delta_max + 1):
        single = mmse_error(model, table, (d,))
        if buffer == 1:
            rows.append([str(d), fmt(single)])
            continue
        ages = (d,) + fixed
        value = fmt(mmse_error(model, table, ages)) if is_valid(ages, delta_max) and d < fixed[0] else ""
        rows.append([str(d), value, fmt(single)])
    header = ["delta_1", "error"] if buffer == 1 else ["delta_1", "error", "error_b1"]
    return header, rows


# -- solve -------------------------------------------------------------------


def sensor_problems(cfg: ExperimentConfig) -> list[SensorProblem]:
    states, tables = build_tables(cfg.sim_config())
    return [
        SensorProblem(m, states, TransitionModel(m.success_prob, cfg.delta_max), e)
        for m, e in zip(cfg.sensors, tables)
    ]


def run_solve(cfg: ExperimentConfig, out_dir: Path | None = None) -> tuple[DualSolveReport, list[SensorProblem]]:
    sensors = sensor_problems(cfg)
    report = dual_ascent(sensors, cfg.M, cfg.gamma, cfg.dual)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out_dir / REPORT_NAME, json.dumps(report.to_json(), indent=2) + "\n")
        atomic_write_text(out_dir / DIGEST_NAME, cfg.solve_digest() + "\n")
        for n, (q, sp) in enumerate(zip(report.q_tables, sensors)):
            dump_q_csv(out_dir / f"q_sensor_{n + 1}.csv", q, sp.errs)
    return report, sensors


def cached_solution(cfg: ExperimentConfig, out_dir: Path) -> tuple[float, list[QTable]] | None:
    """Re-derive Q-tables from a cached report, if it matches ``cfg``."""
    rp, dp = out_dir / REPORT_NAME, out_dir / DIGEST_NAME
    if not (rp.exists() and dp.exists()) or dp.read_text().strip() != cfg.solve_digest():
        return None
    lam = float(json.loads(rp.read_text())["lambda_star"])
    ev = DualEvaluator(sensor_problems(cfg), cfg.M, cfg.gamma, cfg.vi_tol)
    return lam, [q for _, q, _ in ev.solve(lam)]


# -- simulate ----------------------------------------------------------------


def run_simulate(cfg: ExperimentConfig, policy: PolicyKind, out_dir: Path | None = None) -> SimResult:
    lam, qs = None, None
    if policy is PolicyKind.MGF:
        cached = cached_solution(cfg, out_dir) if out_dir is not None else None
        if cached is None:
            log.info("no cached solve report; running the dual solve first")
            report, _ = run_solve(cfg, out_dir)
            lam, qs = report.lambda_star, report.q_tables
        else:
            lam, qs = cached
    result = simulate(cfg.sim_config(), policy, lam, qs)
    if out_dir is not None:
        text = _csv_text(result_header(len(cfg.sensors)), [result_row(result)])
        atomic_write_text(out_dir / f"simulate_{policy.value}.csv", text)
    return result


# -- sweep -------------------------------------------------------------------


def cell_seed(master: int, p: float, b: int) -> int:
    digest = hashlib.sha256(f"{int(master)}|{p:.12g}|{int(b)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def sweep_header(n_sensors: int) -> list[str]:
    return result_header(n_sensors, ["lambda_star", "errors"])


def run_cell(cfg: ExperimentConfig, p: float, b: int, policies: Sequence[PolicyKind]) -> list[list[str]]:
    """One (p, buffer) cell: re-solve the dual, then simulate every policy."""
    cell = cfg.with_success_prob(p)
    cell.buffer = b
    cell.seed = cell_seed(cfg.seed, p, b)
    try:
        sensors = sensor_problems(cell)
        lam, qs = None, None
        if PolicyKind.MGF in policies:
            report = dual_ascent(sensors, cell.M, cell.gamma, cell.dual)
            lam, qs = report.lambda_star, report.q_tables
        states, tables = sensors[0].states, [sp.errs for sp in sensors]
        rows = []
        for pol in policies:
            res = simulate(cell.sim_config(), pol, lam, qs, states=states, error_tables=tables)
            rows.append(result_row(res) + [fmt(lam), ""])
        return rows
    except Exception as exc:  # recorded in the row, sweep continues
        log.warning("sweep cell p=%s b=%s failed: %s", p, b, exc)
        blank = [""] * (4 + len(cfg.sensors))
        msg = str(exc).replace(",", ";").replace("\n", " ")
        return [[pol.value, fmt(p), str(b)] + blank + [msg] for pol in policies]


def _cell_path(out_dir: Path, p: float, b: int) -> Path:
    return out_dir / "cells" / f"p{p:.12g}_b{b}.csv"


def _run_and_store(args) -> tuple[float, int, list[list[str]]]:
    cfg, p, b, policies, out_dir = args
    rows = run_cell(cfg, p, b, policies)
    if out_dir is not None:
        atomic_write_text(_cell_path(out_dir, p, b), _csv_text(sweep_header(len(cfg.sensors)), rows))
    return p, b, rows


def run_sweep(
    cfg: ExperimentConfig,
    p_grid: str | None = None,
    buffers: Sequence[int] | None = None,
    policies: Sequence[PolicyKind] = (PolicyKind.MGF,),
    out_dir: Path | None = None,
    jobs: int = 1,
) -> tuple[list[str], list[list[str]]]:
    grid = parse_grid(p_grid or cfg.sweep.p_grid)
    bufs = [int(b) for b in (buffers or cfg.sweep.buffers)]
    tasks = [(cfg, p, b, tuple(policies), out_dir) for b in bufs for p in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_and_store, tasks))
    else:
        done = [_run_and_store(t) for t in tasks]
    rows = [r for _, _, cell_rows in done for r in cell_rows]
    header = sweep_header(len(cfg.sensors))
    if out_dir is not None:
        atomic_write_text(out_dir / "sweep.csv", _csv_text(header, rows))
    return header, rows


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
