"""Monte Carlo engine: size/power grids, power curves, densities and
empirical critical values.

Replication r of a job keyed by K draws its data from
``replication_rng(master_seed, *K, r)``. Jobs are cut into blocks of
replications, the blocks go through ``Executor.map`` and come back in
submission order, so every result is a pure function of its inputs and
never of the worker count.

Stream namespaces:
    0  grid cells, K = (0, cell)
    1  null draws for critical values, K = (1, n, p)
    2  power-curve points, K = (2, beta index, n, p)
    3  density and statistic samples, K = (3, n, p)
"""
import logging
import math
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from rlrt.config import (
    BLOCK_SIZE,
    DEFAULT_ETA,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    MIN_CRITICAL_VALUE_REPS,
)
from rlrt.dependencies import get_executor
from rlrt.errors import RlrtError, check_open_unit, raise_domain_error
from rlrt.models.scenarios import materialize_sigma, mvn_factor, sample_mvn
from rlrt.models.schemas import (
    CellResult,
    DataMatrix,
    DimensionSetup,
    Histogram,
    MethodSpec,
    PowerPoint,
    Scenario,
    SimulationGrid,
)
from rlrt.models.statistics import Sample, evaluate_method, raw_statistic
from rlrt.utils import replication_rng

logger = logging.getLogger(__name__)

GRID_STREAM = 0
CRITICAL_STREAM = 1
CURVE_STREAM = 2
DENSITY_STREAM = 3


@dataclass(frozen=True)
class _Job:
    master_seed: int
    key: Tuple[int, ...]
    n: int
    factor: np.ndarray
    methods: Tuple[MethodSpec, ...]
    reps: int
    eta: float = DEFAULT_ETA
    calibrated: bool = True
    chen_reps: Optional[int] = None
    cutoffs: Tuple[Optional[float], ...] = ()


@dataclass(frozen=True)
class _Block:
    job: _Job
    start: int
    stop: int


@dataclass
class _Outcome:
    raw: np.ndarray
    z: np.ndarray
    reject: np.ndarray
    errors: Dict[int, Exception] = field(default_factory=dict)
    elapsed: float = 0.0


def _skips(job: _Job, method: MethodSpec, rep: int) -> bool:
    return (
        method.name == "chen"
        and job.chen_reps is not None
        and rep >= job.chen_reps
    )


def _run_block(block: _Block) -> _Outcome:
    # module level so that process pools can pickle it
    job = block.job
    started = time.perf_counter()
    shape = (block.stop - block.start, len(job.methods))
    raw = np.full(shape, np.nan)
    z = np.full(shape, np.nan)
    reject = np.full(shape, np.nan)
    errors: Dict[int, Exception] = {}

    for row, rep in enumerate(range(block.start, block.stop)):
        rng = replication_rng(job.master_seed, *job.key, rep)
        sample = Sample(sample_mvn(job.n, None, rng, factor=job.factor))
        for j, method in enumerate(job.methods):
            if j in errors or _skips(job, method, rep):
                continue
            try:
                if job.calibrated:
                    cutoff = job.cutoffs[j] if job.cutoffs else None
                    result = evaluate_method(sample, method, job.eta, cutoff)
                    raw[row, j] = result.raw
                    z[row, j] = result.z
                    reject[row, j] = float(result.reject)
                else:
                    raw[row, j] = raw_statistic(sample, method)
            except RlrtError as exc:
                errors[j] = exc

    logger.debug("block %s [%d, %d) done", job.key, block.start, block.stop)
    return _Outcome(
        raw, z, reject, errors, elapsed=time.perf_counter() - started
    )


def _blocks(job: _Job, block_size: int) -> Iterator[_Block]:
    for start in range(0, job.reps, block_size):
        yield _Block(job, start, min(start + block_size, job.reps))


def _merge(parts: List[_Outcome]) -> _Outcome:
    errors: Dict[int, Exception] = {}
    for part in parts:
        for j, exc in part.errors.items():
            errors.setdefault(j, exc)
    return _Outcome(
        raw=np.concatenate([part.raw for part in parts]),
        z=np.concatenate([part.z for part in parts]),
        reject=np.concatenate([part.reject for part in parts]),
        errors=errors,
        elapsed=sum(part.elapsed for part in parts),
    )


def _dispatch(
    executor: Executor, jobs: Sequence[_Job], block_size: int = BLOCK_SIZE
) -> List[_Outcome]:
    """Run every job, returning outcomes in job order."""
    owners: List[int] = []
    blocks: List[_Block] = []
    for index, job in enumerate(jobs):
        for block in _blocks(job, block_size):
            owners.append(index)
            blocks.append(block)

    parts: List[List[_Outcome]] = [[] for _ in jobs]
    for owner, outcome in zip(owners, executor.map(_run_block, blocks)):
        parts[owner].append(outcome)
    return [_merge(job_parts) for job_parts in parts]


def rejection_rate(rejects: np.ndarray) -> Tuple[float, float]:
    """Rate and its Monte Carlo standard error over the finite entries."""
    values = rejects[~np.isnan(rejects)]
    if values.size == 0:
        return math.nan, math.nan
    rate = float(values.mean())
    return rate, math.sqrt(rate * (1.0 - rate) / values.size)


def _null_job(
    method: MethodSpec,
    setup: DimensionSetup,
    eta: float,
    reps: int,
    seed: int,
    calibrated: bool,
) -> _Job:
    return _Job(
        master_seed=seed,
        key=(CRITICAL_STREAM, setup.n, setup.p),
        n=setup.n,
        factor=np.eye(setup.p),
        methods=(method.model_copy(update={"size_corrected": False}),),
        reps=reps,
        eta=eta,
        calibrated=calibrated,
    )


def _critical_value(
    executor: Executor,
    method: MethodSpec,
    setup: DimensionSetup,
    eta: float,
    reps: int,
    seed: int,
    scale: str,
) -> float:
    check_open_unit("eta", eta)
    if reps < MIN_CRITICAL_VALUE_REPS:
        raise_domain_error("reps", reps, f"[{MIN_CRITICAL_VALUE_REPS}, inf)")
    if scale not in ("z", "raw"):
        raise_domain_error("scale", scale, "{z, raw}")
    job = _null_job(method, setup, eta, reps, seed, calibrated=scale == "z")
    (outcome,) = _dispatch(executor, [job])
    if outcome.errors:
        raise outcome.errors[0]
    values = (outcome.z if scale == "z" else outcome.raw)[:, 0]
    return float(np.quantile(values, 1.0 - eta))


def empirical_critical_value(
    method: MethodSpec,
    setup: DimensionSetup,
    eta: float = DEFAULT_ETA,
    reps: int = MIN_CRITICAL_VALUE_REPS,
    seed: int = DEFAULT_SEED,
    scale: str = "z",
    workers: int = DEFAULT_WORKERS,
) -> float:
    """Empirical (1 - eta) null quantile of the standardised or raw statistic.

    The raw scale needs no calibration, so it also serves the rLRT when
    gamma_tilde >= 1.
    """
    with get_executor(workers) as executor:
        return _critical_value(
            executor, method, setup, eta, reps, seed, scale
        )


def _cell_row(
    scenario: Scenario,
    setup: DimensionSetup,
    gamma: float,
    method: MethodSpec,
    reps: int,
    seed: int,
    rejects: Optional[np.ndarray] = None,
    error: Optional[Exception] = None,
    elapsed: float = 0.0,
) -> CellResult:
    rate = mc_se = None
    if error is None and rejects is not None:
        rate, mc_se = rejection_rate(rejects)
    return CellResult(
        scenario=scenario.label,
        n=setup.n,
        p=setup.p,
        gamma=gamma,
        method=method.label,
        lam=method.lam,
        reps=reps,
        rate=rate,
        mc_se=mc_se,
        seed=seed,
        elapsed=elapsed,
        error=str(error) if error is not None else None,
    )


def _usable(cutoff) -> Optional[float]:
    return cutoff if isinstance(cutoff, float) else None


def _data_cells(
    grid: SimulationGrid,
) -> List[Tuple[Scenario, DimensionSetup, float]]:
    # cell index order: scenario, then n, then gamma or p
    if grid.dimensions:
        return [
            (scenario, DimensionSetup(n=n, p=p), p / n)
            for scenario in grid.scenarios
            for n in grid.sample_sizes
            for p in grid.dimensions
        ]
    return [
        (scenario, DimensionSetup.from_gamma(n, gamma), gamma)
        for scenario in grid.scenarios
        for n in grid.sample_sizes
        for gamma in grid.gammas
    ]


def run_grid(
    grid: SimulationGrid, workers: int = DEFAULT_WORKERS
) -> List[CellResult]:
    """Rejection rates for every (scenario, n, gamma, method) of the grid.

    All methods of a data cell see the same replications. Errors are
    recorded on the affected rows and never abort the grid.
    """
    seed = grid.master_seed
    cells = _data_cells(grid)

    with get_executor(workers) as executor:
        cutoffs: Dict[Tuple[MethodSpec, int, int], object] = {}
        for method in grid.methods:
            if not method.size_corrected:
                continue
            for _, setup, _ in cells:
                key = (method, setup.n, setup.p)
                if key in cutoffs:
                    continue
                try:
                    cutoffs[key] = _critical_value(
                        executor,
                        method,
                        setup,
                        grid.eta,
                        grid.critical_reps,
                        seed,
                        "z",
                    )
                except RlrtError as exc:
                    cutoffs[key] = exc

        jobs: List[_Job] = []
        failed: Dict[int, Exception] = {}
        for index, (scenario, setup, _) in enumerate(cells):
            try:
                factor = mvn_factor(materialize_sigma(scenario, setup.p))
            except RlrtError as exc:
                failed[index] = exc
                factor = np.eye(setup.p)
            jobs.append(
                _Job(
                    master_seed=seed,
                    key=(GRID_STREAM, index),
                    n=setup.n,
                    factor=factor,
                    methods=tuple(grid.methods),
                    reps=0 if index in failed else grid.reps,
                    eta=grid.eta,
                    chen_reps=grid.chen_reps,
                    cutoffs=tuple(
                        _usable(cutoffs.get((m, setup.n, setup.p)))
                        for m in grid.methods
                    ),
                )
            )
        outcomes = _dispatch(executor, [job for job in jobs if job.reps])

    done = iter(outcomes)
    rows: List[CellResult] = []
    for index, (scenario, setup, gamma) in enumerate(cells):
        outcome = None if index in failed else next(done)
        for j, method in enumerate(grid.methods):
            reps = grid.reps_for(method)
            error = failed.get(index)
            cutoff = cutoffs.get((method, setup.n, setup.p))
            if error is None and isinstance(cutoff, Exception):
                error = cutoff
            if error is None:
                error = outcome.errors.get(j)
            rows.append(
                _cell_row(
                    scenario,
                    setup,
                    gamma,
                    method,
                    reps,
                    seed,
                    rejects=outcome.reject[:, j] if outcome else None,
                    error=error,
                    elapsed=outcome.elapsed if outcome else 0.0,
                )
            )
        logger.info(
            "cell %s n=%d p=%d done", scenario.label, setup.n, setup.p
        )
    return rows


def empirical_power_curve(
    beta_grid: Sequence[float],
    setup: DimensionSetup,
    method: MethodSpec,
    reps: int,
    seed: int = DEFAULT_SEED,
    eta: float = DEFAULT_ETA,
    workers: int = DEFAULT_WORKERS,
) -> List[PowerPoint]:
    """Empirical power of one method against Sigma = I + (beta/p) J per beta."""
    check_open_unit("eta", eta)
    if reps < 1:
        raise_domain_error("reps", reps, "[1, inf)")
    jobs = [
        _Job(
            master_seed=seed,
            key=(CURVE_STREAM, index, setup.n, setup.p),
            n=setup.n,
            factor=mvn_factor(
                materialize_sigma(Scenario(kind="cs_beta", beta=beta), setup.p)
            ),
            methods=(method,),
            reps=reps,
            eta=eta,
        )
        for index, beta in enumerate(beta_grid)
    ]
    with get_executor(workers) as executor:
        outcomes = _dispatch(executor, jobs)

    points = []
    for beta, outcome in zip(beta_grid, outcomes):
        if outcome.errors:
            raise outcome.errors[0]
        rate, mc_se = rejection_rate(outcome.reject[:, 0])
        points.append(PowerPoint(beta=beta, empirical=rate, mc_se=mc_se))
    return points


def simulate_statistics(
    method: MethodSpec,
    scenario: Scenario,
    setup: DimensionSetup,
    reps: int,
    seed: int = DEFAULT_SEED,
    scale: str = "raw",
    workers: int = DEFAULT_WORKERS,
) -> np.ndarray:
    """One statistic per replication, in replication order."""
    if reps < 1:
        raise_domain_error("reps", reps, "[1, inf)")
    if scale not in ("z", "raw"):
        raise_domain_error("scale", scale, "{z, raw}")
    job = _Job(
        master_seed=seed,
        key=(DENSITY_STREAM, setup.n, setup.p),
        n=setup.n,
        factor=mvn_factor(materialize_sigma(scenario, setup.p)),
        methods=(method.model_copy(update={"size_corrected": False}),),
        reps=reps,
        calibrated=scale == "z",
    )
    with get_executor(workers) as executor:
        (outcome,) = _dispatch(executor, [job])
    if outcome.errors:
        raise outcome.errors[0]
    return (outcome.z if scale == "z" else outcome.raw)[:, 0]


def empirical_density(
    method: MethodSpec,
    scenario: Scenario,
    setup: DimensionSetup,
    reps: int,
    seed: int = DEFAULT_SEED,
    bins: int = 50,
    scale: str = "raw",
    workers: int = DEFAULT_WORKERS,
) -> Histogram:
    """Normalised histogram of the raw (or standardised) statistic."""
    if bins < 1:
        raise_domain_error("bins", bins, "[1, inf)")
    values = simulate_statistics(
        method, scenario, setup, reps, seed=seed, scale=scale, workers=workers
    )
    density, edges = np.histogram(values, bins=bins, density=True)
    return Histogram(
        method=method.label,
        scenario=scenario.label,
        n=setup.n,
        p=setup.p,
        reps=reps,
        edges=edges.tolist(),
        density=density.tolist(),
        mean=float(values.mean()),
        variance=float(values.var(ddof=1)) if reps > 1 else 0.0,
    )


def cell_data(grid: SimulationGrid, cell: int = 0, rep: int = 0) -> DataMatrix:
    """The data matrix run_grid draws for replication rep of a data cell."""
    cells = _data_cells(grid)
    if not 0 <= cell < len(cells):
        raise_domain_error("cell", cell, f"[0, {len(cells)})")
    scenario, setup, _ = cells[cell]
    sigma = materialize_sigma(scenario, setup.p)
    rng = replication_rng(grid.master_seed, GRID_STREAM, cell, rep)
    return sample_mvn(setup.n, sigma, rng)
