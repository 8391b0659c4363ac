"""Corrupted-regression study comparing robust and vanilla SGLD."""

from __future__ import annotations

import csv
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from rich.table import Table

from .model import RegressionNet
from .models import ExperimentConfig
from .objective import DROProblem, ThetaBar
from .sgld import DivergenceError, EmpiricalSampler, Trajectory, run_robust, run_vanilla

logger = logging.getLogger(__name__)

BAND_WIDTH = 0.01
CORRUPT_Z_RANGE = (2.0, 2.5)
TRACE_HEADER = ["iter", "v_delta", "test_mse", "elapsed_s"]
SUMMARY_HEADER = ["method", "eta2", "avg_train_time_s", "n_es", "time_to_band_s", "mse_at_nes_or_best"]


class DatasetError(ValueError):
    """Raised for empty or malformed datasets."""


@dataclass(frozen=True)
class Dataset:
    """Rows x = (z, y); ``noise`` keeps each row's Bernoulli label draw."""

    z: np.ndarray
    y: np.ndarray
    corrupt: np.ndarray
    noise: np.ndarray

    @property
    def size(self) -> int:
        return int(self.y.shape[0])

    @property
    def x(self) -> np.ndarray:
        return np.column_stack([self.z, self.y])

    @property
    def corrupt_fraction(self) -> float:
        return float(np.mean(self.corrupt)) if self.size else 0.0


def generate_clean(
    count: int,
    theta_star: Sequence[float],
    noise_scale: float = 0.1,
    seed: int | np.random.SeedSequence = 0,
) -> Dataset:
    """z uniform on [-1, 1]^{m-1}, y = N(theta*, z) + noise_scale * Bernoulli(1/2)."""
    if count < 1:
        raise DatasetError(f"count must be at least 1, got {count}")
    theta_star = np.asarray(theta_star, dtype=float)
    model = RegressionNet(theta_star.shape[0])
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, size=(count, model.m - 1))
    noise = rng.integers(0, 2, size=count)
    y = np.asarray(model.predict(theta_star, z), dtype=float).reshape(-1) + noise_scale * noise
    return Dataset(z=z, y=y, corrupt=np.zeros(count, dtype=bool), noise=noise)


def corrupt(
    dataset: Dataset,
    q: float,
    seed: int | np.random.SeedSequence = 0,
    reuse_noise: bool = False,
    box: tuple[np.ndarray, np.ndarray] | None = None,
) -> Dataset:
    """Replace each row with probability q by an outlier.

    Outliers have z uniform on [2, 2.5]^{m-1} and label y + e, where e is a
    fresh Bernoulli(1/2) draw (or the row's own label draw with
    ``reuse_noise``). With ``box`` given, rows are clipped into it.
    """
    if not 0.0 <= q <= 1.0:
        raise DatasetError(f"q must lie in [0, 1], got {q}")
    rng = np.random.default_rng(seed)
    n = dataset.size
    keep = rng.uniform(size=n) < 1.0 - q
    z_bar = rng.uniform(*CORRUPT_Z_RANGE, size=dataset.z.shape)
    fresh = rng.integers(0, 2, size=n)
    offset = dataset.noise if reuse_noise else fresh

    replace = ~keep
    z = np.where(replace[:, None], z_bar, dataset.z)
    y = np.where(replace, dataset.y + offset, dataset.y)
    if box is not None:
        lo, hi = box
        x = np.column_stack([z, y])
        clipped = np.clip(x, lo, hi)
        changed = int(np.count_nonzero(np.any(clipped != x, axis=1)))
        if changed:
            logger.info("Clipped %d corrupted rows into Xi", changed)
        z, y = clipped[:, :-1], clipped[:, -1]
    return Dataset(z=z, y=y, corrupt=dataset.corrupt | replace, noise=dataset.noise)


def test_mse(theta: Sequence[float], dataset: Dataset) -> float:
    """Mean squared loss of theta on the dataset."""
    if dataset.size == 0:
        raise DatasetError("Cannot evaluate the loss on an empty dataset")
    theta = np.asarray(theta, dtype=float)
    model = RegressionNet(theta.shape[0])
    residual = dataset.y - np.asarray(model.predict(theta, dataset.z)).reshape(-1)
    return float(np.mean(residual**2))


test_mse.__test__ = False


def reference_band(ref: float) -> tuple[float, float]:
    return (1.0 - BAND_WIDTH) * ref, (1.0 + BAND_WIDTH) * ref


@dataclass
class ExperimentData:
    train: Dataset
    test: Dataset
    sgld_seed: int
    ref_mse: float


def make_data(config: ExperimentConfig, seed: int) -> ExperimentData:
    """Training set (clean then corrupted), clean test set and SGLD seed for one repeat."""
    clean_seq, corrupt_seq, test_seq, sgld_seq = np.random.SeedSequence(seed).spawn(4)
    grid = config.grid
    clean = generate_clean(config.n_train, config.theta_star, seed=clean_seq)
    train = corrupt(
        clean,
        config.q,
        seed=corrupt_seq,
        reuse_noise=config.reuse_corruption_noise,
        box=(grid.lo, grid.hi),
    )
    test = generate_clean(config.n_test, config.theta_star, seed=test_seq)
    return ExperimentData(
        train=train,
        test=test,
        sgld_seed=int(sgld_seq.generate_state(1)[0]),
        ref_mse=test_mse(config.theta_star, test),
    )


@dataclass
class RunMetrics:
    method: str
    eta2: float | None
    seed: int
    ref_mse: float
    final_mse: float = math.nan
    best_mse: float = math.nan
    n_es: int | None = None
    time_to_band_s: float | None = None
    mse_at_nes: float | None = None
    wall_time_s: float = math.nan
    iterations: list[int] = field(default_factory=list)
    v_delta_trace: list[float] = field(default_factory=list)
    mse_trace: list[float] = field(default_factory=list)
    elapsed_trace: list[float] = field(default_factory=list)
    final_state: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def label(self) -> str:
        return "vanilla" if self.eta2 is None else f"robust-{self.eta2:g}"

    @property
    def diverged(self) -> bool:
        return self.error is not None


class BandMonitor:
    """Tracks test loss after every iteration: band entry and closest-to-reference value."""

    def __init__(self, test: Dataset, ref: float, d: int) -> None:
        self.test = test
        self.ref = ref
        self.low, self.high = reference_band(ref)
        self.d = d
        self.n_es: int | None = None
        self.time_to_band: float | None = None
        self.mse_at_nes: float | None = None
        self.best_mse = math.inf

    def mse(self, state: np.ndarray) -> float:
        return test_mse(state[: self.d], self.test)

    def __call__(self, iteration: int, state: np.ndarray, elapsed: float) -> None:
        mse = self.mse(state)
        if abs(mse - self.ref) < abs(self.best_mse - self.ref):
            self.best_mse = mse
        if self.n_es is None and self.low <= mse <= self.high:
            self.n_es = iteration
            self.time_to_band = elapsed
            self.mse_at_nes = mse


def build_problem(config: ExperimentConfig, data: ExperimentData, eta2: float) -> DROProblem:
    """The discretised problem whose reference measure is the snapped training set."""
    return DROProblem.build(
        RegressionNet(config.m),
        config.grid,
        data.train.x,
        eta1=config.eta1,
        eta2=eta2,
        p=config.p,
        delta=config.delta,
    )


def run_single(config: ExperimentConfig, seed: int, eta2: float | None) -> RunMetrics:
    """One training run; ``eta2=None`` selects vanilla SGLD.

    Divergence is caught, logged with the run tag and reported in the
    metrics instead of being raised.
    """
    data = make_data(config, seed)
    model = RegressionNet(config.m)
    sgld = config.sgld_config(data.sgld_seed)
    sampler = EmpiricalSampler(data.train.x)
    monitor = BandMonitor(data.test, data.ref_mse, model.d)
    metrics = RunMetrics(method="vanilla" if eta2 is None else "robust", eta2=eta2, seed=seed, ref_mse=data.ref_mse)
    hooks = {"test_mse": monitor.mse}

    logger.info("Starting %s seed=%d", metrics.label, seed)
    try:
        if eta2 is None:
            theta_0 = np.asarray(config.theta_bar_0[: model.d])
            trajectory = run_vanilla(model, sampler, sgld, theta_0, hooks=hooks, monitor=monitor)
        else:
            problem = build_problem(config, data, eta2)
            if config.eval_v_delta:
                hooks["v_delta"] = lambda state: problem.v_delta_full(ThetaBar.from_vector(state))
            trajectory = run_robust(
                problem, sampler, sgld, ThetaBar.from_vector(config.theta_bar_0), hooks=hooks, monitor=monitor
            )
    except DivergenceError as exc:
        metrics.error = f"diverged at iteration {exc.iteration}"
        logger.error("Run %s seed=%d %s", metrics.label, seed, metrics.error)
        return metrics

    _fill_metrics(metrics, trajectory, monitor)
    logger.info("Finished %s seed=%d in %.2fs (n_es=%s)", metrics.label, seed, metrics.wall_time_s, metrics.n_es)
    return metrics


def _fill_metrics(metrics: RunMetrics, trajectory: Trajectory, monitor: BandMonitor) -> None:
    metrics.iterations = list(trajectory.iterations)
    metrics.mse_trace = list(trajectory.metrics["test_mse"])
    metrics.v_delta_trace = list(trajectory.metrics.get("v_delta", [math.nan] * len(trajectory.iterations)))
    metrics.elapsed_trace = list(trajectory.elapsed_s)
    metrics.final_mse = metrics.mse_trace[-1]
    metrics.best_mse = monitor.best_mse
    metrics.n_es = monitor.n_es
    metrics.time_to_band_s = monitor.time_to_band
    metrics.mse_at_nes = monitor.mse_at_nes
    metrics.wall_time_s = trajectory.wall_time_s
    metrics.final_state = trajectory.final_state.tolist()


def _jobs(config: ExperimentConfig) -> list[tuple[int, float | None]]:
    jobs: list[tuple[int, float | None]] = []
    for seed in config.seeds:
        jobs.extend((seed, eta2) for eta2 in config.eta2_list)
        jobs.append((seed, None))
    return jobs


def run_experiment(config: ExperimentConfig, output_dir: Path | None = None) -> list[RunMetrics]:
    """Every (seed, method) run of the study, robust at each eta2 plus vanilla.

    Runs are independent; with ``config.workers > 1`` they execute in a
    process pool. Results come back in job order either way.
    """
    jobs = _jobs(config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_single, config, seed, eta2) for seed, eta2 in jobs]
            metrics = [future.result() for future in futures]
    else:
        metrics = [run_single(config, seed, eta2) for seed, eta2 in jobs]

    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        for run in metrics:
            if not run.diverged:
                write_trace(output_dir / f"trace_{run.label}_{run.seed}.csv", run)
        write_summary(aggregate(metrics), output_dir / "summary.csv")
    return metrics


@dataclass
class SummaryRow:
    method: str
    eta2: float | None
    runs: int
    hits: int
    avg_train_time_s: float
    n_es: int | None
    time_to_band_s: float | None
    mse_at_nes_or_best: float


def aggregate(metrics: Iterable[RunMetrics]) -> list[SummaryRow]:
    """One row per method, in order of first appearance.

    n_es is the largest per-run n_es, and NA unless every run entered the
    band. The reported loss is the one of the run attaining n_es, or the
    median closest-to-reference loss when n_es is NA.
    """
    groups: dict[tuple[str, float | None], list[RunMetrics]] = {}
    for run in metrics:
        groups.setdefault((run.method, run.eta2), []).append(run)

    rows = []
    for (method, eta2), runs in groups.items():
        done = [run for run in runs if not run.diverged]
        hits = [run for run in done if run.n_es is not None]
        avg_time = statistics.fmean(run.wall_time_s for run in done) if done else math.nan
        if done and len(hits) == len(runs):
            worst = max(hits, key=lambda run: run.n_es)
            n_es, time_to_band, loss = worst.n_es, worst.time_to_band_s, worst.mse_at_nes
        else:
            n_es, time_to_band = None, None
            loss = statistics.median(run.best_mse for run in done) if done else math.nan
        rows.append(
            SummaryRow(
                method=method,
                eta2=eta2,
                runs=len(runs),
                hits=len(hits),
                avg_train_time_s=avg_time,
                n_es=n_es,
                time_to_band_s=time_to_band,
                mse_at_nes_or_best=loss,
            )
        )
    return rows


def _fmt(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return format(value, ".10g")


def write_trace(path: Path, run: RunMetrics, timings: bool = True) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_HEADER)
        for it, v_delta, mse, elapsed in zip(run.iterations, run.v_delta_trace, run.mse_trace, run.elapsed_trace):
            writer.writerow([it, _fmt(v_delta), _fmt(mse), _fmt(elapsed) if timings else ""])


def write_summary(rows: Sequence[SummaryRow], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.method,
                    _fmt(row.eta2),
                    _fmt(row.avg_train_time_s),
                    "NA" if row.n_es is None else row.n_es,
                    "NA" if row.time_to_band_s is None else _fmt(row.time_to_band_s),
                    _fmt(row.mse_at_nes_or_best),
                ]
            )


def render_summary(rows: Sequence[SummaryRow]) -> Table:
    table = Table(title="Experiment Summary")
    table.add_column("Method")
    table.add_column("eta2", justify="right")
    table.add_column("Runs in band", justify="right")
    table.add_column("Avg train time (s)", justify="right")
    table.add_column("n_es", justify="right")
    table.add_column("Time to band (s)", justify="right")
    table.add_column("MSE", justify="right")
    for row in rows:
        table.add_row(
            row.method,
            "" if row.eta2 is None else f"{row.eta2:g}",
            f"{row.hits}/{row.runs}",
            f"{row.avg_train_time_s:.2f}",
            "NA" if row.n_es is None else str(row.n_es),
            "NA" if row.time_to_band_s is None else f"{row.time_to_band_s:.2f}",
            f"{row.mse_at_nes_or_best:.6f}",
        )
    return table
