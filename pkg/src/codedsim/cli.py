"""Command-line front end: scenarios -> plans -> simulations -> reports."""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from . import fitting, reports
from .allocation import ScaConfig
from .planner import ALLOCATIONS, POLICIES, build_plan, load_plan, save_plan
from .scenario import GeneratorConfig, generate_scenario, load_scenario, save_scenario
from .simulator import monte_carlo

_POLICY = click.Choice(POLICIES)
_ALLOCATION = click.Choice(ALLOCATIONS)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise click.ClickException(f"expected a comma-separated number list, got {text!r}") from exc
    if not values:
        raise click.ClickException(f"expected a non-empty number list, got {text!r}")
    return values


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group()
def main():
    """Plan and simulate coded matrix-vector workloads."""


@main.command()
@click.option("--masters", type=int, required=True, help="Number of masters M.")
@click.option("--workers", type=int, required=True, help="Number of shared workers N.")
@click.option("--task-rows", default="10000", show_default=True, help="Rows per master (one value or M comma-separated).")
@click.option("--worker-a-choices", default=None, help="Comma-separated worker shift values to draw from (ms).")
@click.option("--worker-a-range", default=None, help="lo,hi uniform range for worker shifts (ms).")
@click.option("--master-a-choices", default="0.4,0.5", show_default=True, help="Local shift values to draw from (ms).")
@click.option("--gamma-multiplier", type=float, default=2.0, show_default=True, help="gamma = multiplier * u on worker links.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def gen(masters, workers, task_rows, worker_a_choices, worker_a_range, master_a_choices,
        gamma_multiplier, seed, out_path):
    """Generate a random scenario file."""
    rows = _float_list(task_rows)
    config = _guard(
        GeneratorConfig,
        num_masters=masters,
        num_workers=workers,
        task_rows=[int(r) for r in rows] if len(rows) > 1 else int(rows[0]),
        worker_shift_choices=_float_list(worker_a_choices) if worker_a_choices else None,
        worker_shift_range=tuple(_float_list(worker_a_range)) if worker_a_range else None,
        master_shift_choices=_float_list(master_a_choices),
        gamma_multiplier=gamma_multiplier,
    )
    scenario = _guard(generate_scenario, config, seed)
    _guard(save_scenario, scenario, out_path)
    click.echo(f"wrote scenario ({masters} masters, {workers} workers) to {out_path}")


_plan_options = [
    click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--policy", type=_POLICY, default="dedicated-iter", show_default=True),
    click.option("--allocation", type=_ALLOCATION, default="markov", show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--step", type=float, default=0.01, show_default=True, help="Grid step for brute-force policy."),
    click.option("--sca-alpha", type=float, default=0.995, show_default=True),
    click.option("--sca-max-iters", type=int, default=500, show_default=True),
    click.option("--comm/--no-comm", "include_comm", default=True, show_default=True,
                 help="Include communication delay in planning and simulation."),
]


def _add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


def _build(scenario, policy, allocation, seed, step, sca_alpha, sca_max_iters, include_comm):
    cfg = ScaConfig(alpha=sca_alpha, max_iters=sca_max_iters)
    return build_plan(
        scenario,
        policy,
        allocation,
        seed=seed,
        sca_cfg=cfg,
        step=step,
        include_comm=include_comm,
    )


@main.command()
@_add_options(_plan_options)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def plan(scenario_path, policy, allocation, seed, step, sca_alpha, sca_max_iters,
         include_comm, out_path):
    """Compute a plan and report its predicted delay range."""
    scenario = _guard(load_scenario, scenario_path)
    result = _guard(
        _build, scenario, policy, allocation, seed, step, sca_alpha, sca_max_iters, include_comm
    )
    if out_path:
        _guard(save_plan, result, out_path)
    delays = result.predicted_delay
    click.echo(
        f"policy={policy} allocation={result.allocation_tag} "
        f"predicted delay ms: min={delays.min():.6g} max={delays.max():.6g}"
        + (f" -> {out_path}" if out_path else "")
    )


@main.command()
@_add_options(_plan_options)
@click.option("--plan", "plan_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Simulate an existing plan file instead of planning first.")
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--rho", type=float, default=0.95, show_default=True)
@click.option("--integer-loads", is_flag=True, help="Round loads to whole rows before simulating.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Summary TSV destination (stdout when omitted).")
@click.option("--cdf-out", default=None, type=click.Path(dir_okay=False),
              help="Write the max-completion empirical CDF as CSV.")
@click.option("--cdf-points", type=int, default=200, show_default=True)
@click.option("--per-trial-out", default=None, type=click.Path(dir_okay=False),
              help="Write one CSV row per trial.")
def simulate(scenario_path, policy, allocation, seed, step, sca_alpha, sca_max_iters,
             include_comm, plan_path, trials, threads, rho, integer_loads, out_path,
             cdf_out, cdf_points, per_trial_out):
    """Monte Carlo evaluation of a plan."""
    scenario = _guard(load_scenario, scenario_path)
    if plan_path:
        the_plan = _guard(load_plan, plan_path)
    else:
        the_plan = _guard(
            _build, scenario, policy, allocation, seed, step, sca_alpha, sca_max_iters, include_comm
        )
    stats = _guard(
        monte_carlo,
        scenario,
        the_plan,
        trials,
        seed,
        threads=threads,
        include_comm=include_comm,
        integer_loads=integer_loads,
        keep_trials=per_trial_out is not None,
    )
    summary = _guard(
        reports.simulate_summary, stats, rho, float(the_plan.predicted_delay.max())
    )
    _write(out_path, summary)
    if out_path:
        click.echo(f"wrote summary to {out_path}")
    if cdf_out:
        Path(cdf_out).write_text(reports.cdf_csv(stats, cdf_points), encoding="utf-8")
        click.echo(f"wrote CDF to {cdf_out}")
    if per_trial_out:
        Path(per_trial_out).write_text(_guard(reports.trials_csv, stats), encoding="utf-8")
        click.echo(f"wrote per-trial CSV to {per_trial_out}")


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", "policies", type=_POLICY, multiple=True, required=True,
              help="Repeat for each policy to compare (at least two).")
@click.option("--allocation", type=_ALLOCATION, default="markov", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--step", type=float, default=0.01, show_default=True)
@click.option("--sca-alpha", type=float, default=0.995, show_default=True)
@click.option("--sca-max-iters", type=int, default=500, show_default=True)
@click.option("--comm/--no-comm", "include_comm", default=True, show_default=True)
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--rho", type=float, default=0.95, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.option("--cdf-dir", default=None, type=click.Path(file_okay=False),
              help="Directory for one CDF CSV per policy.")
@click.option("--cdf-points", type=int, default=200, show_default=True)
def compare(scenario_path, policies, allocation, seed, step, sca_alpha, sca_max_iters,
            include_comm, trials, threads, rho, out_path, cdf_dir, cdf_points):
    """Plan and simulate several policies on one scenario, same seed."""
    if len(policies) < 2:
        raise click.ClickException("compare needs at least two --policy entries")
    scenario = _guard(load_scenario, scenario_path)
    entries = []
    for policy in policies:
        the_plan = _guard(
            _build, scenario, policy, allocation, seed, step, sca_alpha, sca_max_iters, include_comm
        )
        stats = _guard(
            monte_carlo, scenario, the_plan, trials, seed,
            threads=threads, include_comm=include_comm,
        )
        entries.append(
            {
                "policy": policy,
                "allocation": the_plan.allocation_tag,
                "predicted_max": float(the_plan.predicted_delay.max()),
                "mean_max": stats.mean_of_max,
                "quantile": stats.quantile(rho),
            }
        )
        if cdf_dir:
            directory = Path(cdf_dir)
            directory.mkdir(parents=True, exist_ok=True)
            out = directory / f"cdf_{policy}.csv"
            out.write_text(reports.cdf_csv(stats, cdf_points), encoding="utf-8")
    _write(out_path, reports.compare_table(entries, rho))
    if out_path:
        click.echo(f"wrote comparison to {out_path}")


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--param", type=click.Choice(["gamma-ratio"]), default="gamma-ratio", show_default=True)
@click.option("--values", required=True, help="Comma-separated gamma/u ratios to sweep.")
@click.option("--policy", type=_POLICY, default="dedicated-iter", show_default=True)
@click.option("--allocation", type=_ALLOCATION, default="markov", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--step", type=float, default=0.01, show_default=True)
@click.option("--sca-alpha", type=float, default=0.995, show_default=True)
@click.option("--sca-max-iters", type=int, default=500, show_default=True)
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def sweep(scenario_path, param, values, policy, allocation, seed, step, sca_alpha,
          sca_max_iters, trials, threads, out_path):
    """Re-plan and simulate while sweeping the communication/computation rate ratio."""
    ratios = _float_list(values)
    if min(ratios) <= 0:
        raise click.ClickException("sweep values must be positive")
    scenario = _guard(load_scenario, scenario_path)
    rows = []
    for ratio in ratios:
        scaled = _guard(scenario.with_gamma_ratio, ratio)
        the_plan = _guard(
            _build, scaled, policy, allocation, seed, step, sca_alpha, sca_max_iters, True
        )
        stats = _guard(monte_carlo, scaled, the_plan, trials, seed, threads=threads)
        local = the_plan.local_load_ratio()
        rows.append(
            {
                "ratio": ratio,
                "mean_max": stats.mean_of_max,
                "local_ratios": [float(r) for r in local],
                "local_ratio_mean": float(np.mean(local)),
            }
        )
    _write(out_path, reports.sweep_table(rows, scenario.num_masters))
    if out_path:
        click.echo(f"wrote sweep to {out_path}")


@main.command()
@click.option("--samples", "samples_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CSV file with one per-row delay sample (ms) per line.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def fit(samples_path, out_path):
    """Fit a shifted exponential to measured per-row delays."""
    samples = _guard(fitting.load_samples, samples_path)
    result = _guard(fitting.fit_shifted_exponential, samples)
    text = json.dumps(fitting.fit_to_dict(result), indent=2, sort_keys=True) + "\n"
    _write(out_path, text)
    if out_path:
        click.echo(f"wrote fit to {out_path}")


if __name__ == "__main__":
    main()
