"""Command-line front end: ``aoibuf error-curve | solve | simulate | sweep``.

Exit status is 0 on success, 2 on usage or configuration errors and 1 on
runtime failures.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import _kernels
from .config import ConfigError, ExperimentConfig, load_config, validate
from .experiments import error_curve, run_simulate, run_solve, run_sweep, atomic_write_text, _csv_text
from .scheduling import PolicyKind
from .source import load_model

log = logging.getLogger("aoibuf")


class UsageFailure(click.ClickException):
    exit_code = 2


def _fail(exc: Exception) -> click.ClickException:
    if isinstance(exc, (ConfigError, ValueError)):
        return UsageFailure(str(exc))
    return click.ClickException(f"{type(exc).__name__}: {exc}")


@click.group(invoke_without_command=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Experiment config (JSON).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Master seed (u64).")
@click.option("--delta-max", type=int, help="Age truncation cap.")
@click.option("--gamma", type=float, help="Discount factor in [0, 1).")
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--print-config", is_flag=True, help="Print the effective configuration and exit.")
@click.pass_context
def main(ctx, config_path, out_dir, seed, delta_max, gamma, log_level, print_config):
    """Buffer-based remote estimation: error curves, dual solve, MGF simulation."""
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config_path)
        if out_dir is not None:
            cfg.out_dir = out_dir
        if seed is not None:
            cfg.seed = seed
        if delta_max is not None:
            cfg.delta_max = delta_max
        if gamma is not None:
            cfg.gamma = gamma
        validate(cfg)
    except ConfigError as exc:
        raise UsageFailure(str(exc)) from exc
    log.debug("kernel backend: %s", _kernels.backend())
    if print_config:
        click.echo(json.dumps(cfg.to_json(), indent=2))
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
    ctx.obj = cfg


def _out(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@main.command("error-curve")
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False),
              help="Model JSON; defaults to the first configured sensor.")
@click.option("--buffer", type=int, default=1, show_default=True)
@click.option("--fixed-ages", default="", help="Comma-separated older ages, e.g. '3' for buffer 2.")
@click.option("--max-age", type=int, default=None, help="Largest delta_1 to tabulate (default: --delta-max).")
@click.pass_obj
def error_curve_cmd(cfg: ExperimentConfig, model_file, buffer, fixed_ages, max_age):
    """Tabulate estimation error against the freshest age."""
    try:
        model = load_model(model_file) if model_file else cfg.sensors[0]
        fixed = [int(x) for x in fixed_ages.split(",") if x.strip()]
        header, rows = error_curve(model, buffer, max_age or cfg.delta_max, fixed)
    except (ValueError, OSError) as exc:
        raise _fail(exc) from exc
    path = _out(cfg) / f"error_curve_b{buffer}.csv"
    atomic_write_text(path, _csv_text(header, rows))
    click.echo(f"wrote {len(rows)} rows to {path}")


@main.command()
@click.pass_obj
def solve(cfg: ExperimentConfig):
    """Compute the optimal Lagrange multiplier and per-sensor Q-tables."""
    try:
        report, _ = run_solve(cfg, _out(cfg))
    except Exception as exc:
        raise _fail(exc) from exc
    click.echo(
        f"lambda_star={report.lambda_star:.12g} usage={report.final_usage:.12g} "
        f"budget={report.budget:.12g} ({report.stop_reason}, {len(report.iterates)} iterations)"
    )


@main.command()
@click.option("--policy", required=True, type=click.Choice([p.value for p in PolicyKind]))
@click.option("--p", "success_prob", type=float, help="Override every sensor's success probability.")
@click.option("--buffer", type=int, help="Override the buffer size.")
@click.option("--horizon", type=int, help="Override slots per replication.")
@click.option("--replications", type=int, help="Override the replication count.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Override the master seed.")
@click.pass_obj
def simulate(cfg: ExperimentConfig, policy, success_prob, buffer, horizon, replications, seed):
    """Simulate one policy and write its result CSV."""
    try:
        if success_prob is not None:
            cfg = cfg.with_success_prob(success_prob)
        for name, value in (("buffer", buffer), ("horizon", horizon), ("replications", replications), ("seed", seed)):
            if value is not None:
                setattr(cfg, name, value)
        validate(cfg)
    except (ConfigError, ValueError) as exc:
        raise UsageFailure(str(exc)) from exc
    try:
        res = run_simulate(cfg, PolicyKind(policy), _out(cfg))
    except Exception as exc:
        raise _fail(exc) from exc
    click.echo(f"{res.policy} avg_error={res.avg_error:.12g} +/- {res.stderr:.12g}")


@main.command()
@click.option("--p-grid", default=None, help="start:stop:step, inclusive (default from config).")
@click.option("--buffers", default=None, help="Comma-separated buffer sizes (default from config).")
@click.option("--policies", default="mgf", show_default=True, help="Comma-separated policy names.")
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True)
@click.pass_obj
def sweep(cfg: ExperimentConfig, p_grid, buffers, policies, jobs):
    """Average error against success probability for several buffer sizes."""
    try:
        bufs = [int(b) for b in buffers.split(",")] if buffers else None
        pols = [PolicyKind.parse(x.strip()) for x in policies.split(",") if x.strip()]
        header, rows = run_sweep(cfg, p_grid, bufs, pols, _out(cfg), jobs)
    except (ConfigError, ValueError) as exc:
        raise UsageFailure(str(exc)) from exc
    except Exception as exc:
        raise _fail(exc) from exc
    failed = sum(1 for r in rows if r[-1])
    click.echo(f"wrote {len(rows)} rows to {Path(cfg.out_dir) / 'sweep.csv'} ({failed} failed cells)")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
