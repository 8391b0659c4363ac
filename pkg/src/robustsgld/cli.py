from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from .config import load_experiment_config, resolve_output_dir
from .constants import (
    ConstantsError,
    ExternalConstants,
    algorithm1_params,
    compute_bundle,
    primal_gap_bound,
    quadrature_error_bound,
    render_report,
)
from .experiment import (
    aggregate,
    build_problem,
    make_data,
    render_summary,
    run_experiment,
    run_single,
    write_trace,
)
from .harness import SUITES, VerifyContext, print_results, run_suites
from .log import configure_logging
from .models import ExperimentConfig
from .objective import ThetaBar
from .parser import ConfigError, parse_overrides, read_vector, write_vector
from .validator import ValidationResult, check_step_size, validate_experiment_config

app = typer.Typer(help="Robust SGLD for penalised distributionally robust optimisation")
console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger(__name__)

USAGE_ERROR = 2

OVERRIDES_ARG = typer.Argument(None, help="Configuration overrides as key=value")
CONFIG_OPT = typer.Option(None, "--config", "-c", help="Path to a YAML configuration file")
OUTPUT_OPT = typer.Option(None, "--output-dir", "-o", help="Directory for output files")
ETA2_OPT = typer.Option(None, "--eta2", help="Model-uncertainty level (default: first of eta2_list)")
SEED_OPT = typer.Option(None, "--seed", help="Repeat seed (default: first of seeds)")


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable debug logging")) -> None:
    configure_logging(verbose)


def _usage_error(message: str) -> typer.Exit:
    err_console.print(f"[red]{message}[/red]")
    return typer.Exit(code=USAGE_ERROR)


def _load(config_path: Optional[Path], overrides: Optional[list[str]]) -> ExperimentConfig:
    try:
        config = load_experiment_config(config_path, parse_overrides(overrides))
    except (ConfigError, FileNotFoundError) as exc:
        raise _usage_error(str(exc))
    _report(validate_experiment_config(config))
    return config


def _report(result: ValidationResult) -> None:
    for issue in result.issues:
        if issue.level == "error":
            err_console.print(f"[red]error[/red] {issue.message}")
        else:
            logger.warning(issue.message)
    if not result.ok:
        raise typer.Exit(code=USAGE_ERROR)


def _train(
    config: ExperimentConfig,
    output_dir: Optional[Path],
    eta2: Optional[float],
    seed: Optional[int],
    timings: bool,
) -> None:
    seed = config.seeds[0] if seed is None else seed
    if eta2 is not None:
        data = make_data(config, seed)
        bundle = compute_bundle(
            build_problem(config, data, eta2),
            data.train.x,
            float(np.dot(config.theta_bar_0, config.theta_bar_0)),
            beta=config.beta,
            allow_surrogate=False,
        )
        _report(check_step_size(config.lambda_, bundle))

    run = run_single(config, seed, eta2)
    if run.diverged:
        err_console.print(f"[red]{run.label} seed={seed}: {run.error}[/red]")
        raise typer.Exit(code=1)

    out = resolve_output_dir(output_dir, config)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"trace_{run.label}_{seed}.csv"
    write_trace(trace_path, run, timings=timings)
    write_vector(out / f"theta_final_{run.label}_{seed}.txt", np.asarray(run.final_state))
    console.print(
        f"[green]OK[/green] {run.label} seed={seed}: final test MSE {run.final_mse:.6f}, "
        f"n_es={run.n_es if run.n_es is not None else 'NA'}"
    )
    console.print(f"[dim]Trace written to {trace_path}[/dim]")


@app.command()
def train_robust(
    overrides: Optional[list[str]] = OVERRIDES_ARG,
    config_path: Optional[Path] = CONFIG_OPT,
    output_dir: Optional[Path] = OUTPUT_OPT,
    eta2: Optional[float] = ETA2_OPT,
    seed: Optional[int] = SEED_OPT,
    timings: bool = typer.Option(True, "--timings/--no-timings", help="Write elapsed times to the trace"),
) -> None:
    """Train robust SGLD on one corrupted training set."""
    config = _load(config_path, overrides)
    if eta2 is not None and eta2 <= 0:
        raise _usage_error(f"--eta2 must be positive, got {eta2}")
    _train(config, output_dir, config.eta2_list[0] if eta2 is None else eta2, seed, timings)


@app.command()
def train_vanilla(
    overrides: Optional[list[str]] = OVERRIDES_ARG,
    config_path: Optional[Path] = CONFIG_OPT,
    output_dir: Optional[Path] = OUTPUT_OPT,
    seed: Optional[int] = SEED_OPT,
    timings: bool = typer.Option(True, "--timings/--no-timings", help="Write elapsed times to the trace"),
) -> None:
    """Train vanilla SGLD on one corrupted training set."""
    config = _load(config_path, overrides)
    _train(config, output_dir, None, seed, timings)


@app.command()
def experiment(
    overrides: Optional[list[str]] = OVERRIDES_ARG,
    config_path: Optional[Path] = CONFIG_OPT,
    output_dir: Optional[Path] = OUTPUT_OPT,
) -> None:
    """Run every repeat of robust SGLD (each eta2) and vanilla SGLD, then summarise."""
    config = _load(config_path, overrides)
    out = resolve_output_dir(output_dir, config)
    metrics = run_experiment(config, out)
    console.print(render_summary(aggregate(metrics)))
    console.print(f"[dim]Traces and summary.csv written to {out}[/dim]")
    diverged = [run for run in metrics if run.diverged]
    if diverged:
        for run in diverged:
            err_console.print(f"[red]{run.label} seed={run.seed}: {run.error}[/red]")
        raise typer.Exit(code=1)


@app.command()
def constants(
    overrides: Optional[list[str]] = OVERRIDES_ARG,
    config_path: Optional[Path] = CONFIG_OPT,
    output_dir: Optional[Path] = OUTPUT_OPT,
    eta2: Optional[float] = ETA2_OPT,
    seed: Optional[int] = SEED_OPT,
    k_radius: Optional[float] = typer.Option(
        None, "--k-radius", help="Radius of the compact set used by C4"
    ),
    surrogate: bool = typer.Option(
        True, "--surrogate/--no-surrogate", help="Derive the C4 radius from the coercivity bound"
    ),
) -> None:
    """Evaluate every closed-form constant and write constants.txt."""
    config = _load(config_path, overrides)
    eta2 = config.eta2_list[0] if eta2 is None else eta2
    seed = config.seeds[0] if seed is None else seed
    data = make_data(config, seed)
    theta_bar_0 = ThetaBar.from_vector(config.theta_bar_0)
    try:
        bundle = compute_bundle(
            build_problem(config, data, eta2),
            data.train.x,
            theta_bar_0.norm**2,
            beta=config.beta,
            theta_bar_0=theta_bar_0,
            k_radius=k_radius,
            allow_surrogate=surrogate,
        )
        bundle.require_c4()
    except ConstantsError as exc:
        raise _usage_error(str(exc))

    report = render_report(bundle)
    out = resolve_output_dir(output_dir, config)
    out.mkdir(parents=True, exist_ok=True)
    (out / "constants.txt").write_text(report, encoding="utf-8")
    console.print(report, end="", highlight=False)
    if bundle.K_radius_is_surrogate:
        console.print("[yellow]C4 uses the surrogate radius (an over-estimate)[/yellow]")


@app.command()
def params(
    epsilon: float = typer.Option(..., "--epsilon", help="Target accuracy"),
    c_delta_beta: Optional[float] = typer.Option(None, "--c-delta-beta", help="Contraction rate c"),
    c1: Optional[float] = typer.Option(None, "--C1", help="External constant C1"),
    c2: Optional[float] = typer.Option(None, "--C2", help="External constant C2"),
    c6: Optional[float] = typer.Option(None, "--C6", help="Override for C6"),
    overrides: Optional[list[str]] = OVERRIDES_ARG,
    config_path: Optional[Path] = CONFIG_OPT,
    eta2: Optional[float] = ETA2_OPT,
    seed: Optional[int] = SEED_OPT,
) -> None:
    """Parameters (ell, jj, delta, beta, lambda, n) guaranteeing accuracy epsilon."""
    if not epsilon > 0:
        raise _usage_error(f"--epsilon must be positive, got {epsilon}")
    config = _load(config_path, overrides)
    eta2 = config.eta2_list[0] if eta2 is None else eta2
    seed = config.seeds[0] if seed is None else seed
    data = make_data(config, seed)
    theta_bar_0 = ThetaBar.from_vector(config.theta_bar_0)
    external = ExternalConstants(c_delta_beta=c_delta_beta, C1=c1, C2=c2, C6_override=c6)
    try:
        bundle = compute_bundle(
            build_problem(config, data, eta2),
            data.train.x,
            theta_bar_0.norm**2,
            beta=config.beta,
            theta_bar_0=theta_bar_0,
        )
        choices = algorithm1_params(epsilon, bundle, external)
    except ConstantsError as exc:
        raise _usage_error(str(exc))

    table = Table(title=f"Parameters for epsilon={epsilon:g}")
    table.add_column("Parameter")
    table.add_column("Value", justify="right")
    table.add_column("Bound", justify="right")
    table.add_column("Line", justify="right")
    table.add_column("Binding inequality")
    for choice in choices:
        value = str(choice.value) if isinstance(choice.value, int) else f"{choice.value:.6e}"
        table.add_row(
            choice.name, value, f"{choice.relation} {choice.bound:.6e}", str(choice.line), choice.binding
        )
    console.print(table)


@app.command()
def verify(
    suites: Optional[list[str]] = typer.Option(
        None, "--suite", help=f"Suite to run (repeatable): {', '.join(SUITES)}"
    ),
    seed: int = typer.Option(0, "--seed", help="Seed for the random checks"),
    corrupt_gradient: bool = typer.Option(False, "--corrupt-gradient", hidden=True),
) -> None:
    """Run the property suites; exit 1 if any check fails."""
    context = VerifyContext(seed=seed, gradient_fault=1e-2 if corrupt_gradient else 0.0)
    try:
        results = run_suites(suites, context)
    except ValueError as exc:
        raise _usage_error(str(exc))
    print_results(results, console)
    failed = [result for result in results if not result.passed]
    if failed:
        for result in failed:
            err_console.print(f"[red]FAILED[/red] {result.suite}: {result.name}")
        raise typer.Exit(code=1)


@app.command("eval")
def evaluate(
    theta_bar: str = typer.Option(..., "--theta-bar", help="(theta, alpha) inline as [..] or a vector file"),
    overrides: Optional[list[str]] = OVERRIDES_ARG,
    config_path: Optional[Path] = CONFIG_OPT,
    output_dir: Optional[Path] = OUTPUT_OPT,
    eta2: Optional[float] = ETA2_OPT,
    seed: Optional[int] = SEED_OPT,
) -> None:
    """Evaluate the discretised objectives and error bounds at a point."""
    config = _load(config_path, overrides)
    try:
        thetabar = ThetaBar.from_vector(read_vector(theta_bar))
    except (ConfigError, ValueError) as exc:
        raise _usage_error(str(exc))
    if thetabar.theta.shape[0] != config.m:
        raise _usage_error(f"--theta-bar needs {config.m + 1} values, got {thetabar.theta.shape[0] + 1}")

    eta2 = config.eta2_list[0] if eta2 is None else eta2
    seed = config.seeds[0] if seed is None else seed
    data = make_data(config, seed)
    problem = build_problem(config, data, eta2)
    bundle = compute_bundle(
        problem, data.train.x, thetabar.norm**2, beta=config.beta, allow_surrogate=False
    )
    values = {
        "u_discrete": problem.u_discrete(thetabar.theta),
        "v_delta": problem.v_delta_full(thetabar),
        "v_nonsmoothed": problem.v_nonsmoothed(thetabar),
        "smoothing_gap_bound": problem.delta * problem.log_n,
        "quadrature_error_bound": quadrature_error_bound(bundle, thetabar.norm),
        "primal_gap_bound": primal_gap_bound(bundle, float(np.linalg.norm(thetabar.theta))),
    }

    out = resolve_output_dir(output_dir, config)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{name}={value!r}" for name, value in values.items()]
    (out / "eval.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    table = Table(title=f"Evaluation at eta2={eta2:g}")
    table.add_column("Quantity")
    table.add_column("Value", justify="right")
    for name, value in values.items():
        table.add_row(name, f"{value:.8g}" if math.isfinite(value) else str(value))
    console.print(table)


if __name__ == "__main__":
    app()
