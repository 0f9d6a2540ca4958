import logging
from pathlib import Path
from typing import List, Optional, Tuple

import click

from rlrt.commands.options import (
    a1_rule_option,
    build_methods,
    build_setup,
    emit,
    eta_option,
    format_option,
    lambda_option,
    method_option,
    output_option,
    parse_float_list,
    seed_option,
    workers_option,
)
from rlrt.config import (
    CRITICAL_VALUE_REPS,
    DEFAULT_CHEN_REPS,
    DEFAULT_LAMBDA,
    DEFAULT_REPS,
)
from rlrt.errors import ConfigError, RlrtError
from rlrt.models.rmt import analytic_power
from rlrt.models.scenarios import parse_scenario
from rlrt.models.schemas import (
    DensityConfig,
    MethodSpec,
    PowerCurveConfig,
    PowerPoint,
    ShrinkageParams,
    SimulateConfig,
    SimulationGrid,
    Spike,
    SpikedModel,
)
from rlrt.models.simulation import (
    cell_data,
    empirical_density,
    empirical_power_curve,
    run_grid,
)
from rlrt.storage.files import (
    make_provenance,
    read_json_config,
    write_data_matrix,
)

logger = logging.getLogger(__name__)

DEFAULT_GAMMAS = (0.2, 0.5, 0.8)
SIMULATE_COLUMNS = (
    "scenario",
    "n",
    "p",
    "gamma",
    "method",
    "lambda",
    "reps",
    "rate",
    "mc_se",
    "seed",
    "error",
)
CURVE_COLUMNS = (
    "beta",
    "method",
    "lambda",
    "analytic",
    "empirical",
    "mc_se",
    "close_spike",
)
DENSITY_COLUMNS = (
    "method",
    "scenario",
    "n",
    "p",
    "reps",
    "bin_left",
    "bin_right",
    "density",
    "mean",
    "variance",
)


def _grid_from_flags(
    scenarios: Tuple[str, ...],
    sizes: Tuple[int, ...],
    gammas: Tuple[float, ...],
    dimensions: Tuple[int, ...],
    methods: List[MethodSpec],
    reps: int,
    chen_reps: int,
    seed: int,
    eta: float,
    critical_reps: int,
    a1_twos_rule: str,
) -> SimulationGrid:
    return SimulationGrid(
        scenarios=[parse_scenario(s, a1_twos_rule) for s in scenarios],
        sample_sizes=list(sizes),
        gammas=list(gammas),
        dimensions=list(dimensions),
        methods=methods,
        reps=reps,
        chen_reps=chen_reps,
        master_seed=seed,
        eta=eta,
        critical_reps=critical_reps,
    )


@click.command("simulate")
@click.option(
    "--scenario",
    "scenarios",
    multiple=True,
    default=("null",),
    show_default=True,
    help="null, a1, a2, a3, a4 or cs:BETA; repeatable.",
)
@click.option(
    "--n",
    "sizes",
    type=int,
    multiple=True,
    default=(20, 40, 80),
    show_default=True,
    help="Sample size; repeatable.",
)
@click.option(
    "--gamma",
    "gammas",
    type=float,
    multiple=True,
    help="p/n ratio, p = round(gamma n); repeatable [default: 0.2, 0.5, 0.8].",
)
@click.option(
    "--p",
    "dimensions",
    type=int,
    multiple=True,
    help="Dimension, instead of --gamma; repeatable.",
)
@method_option
@lambda_option
@click.option(
    "--size-corrected",
    is_flag=True,
    help="Add a copy of every method rejected at its empirical null cutoff.",
)
@click.option(
    "--reps",
    type=int,
    default=DEFAULT_REPS,
    show_default=True,
    help="Replications per cell.",
)
@click.option(
    "--chen-reps",
    type=int,
    default=DEFAULT_CHEN_REPS,
    show_default=True,
    help="Replications for Chen's test (the first ones of each cell).",
)
@click.option(
    "--critical-reps",
    type=int,
    default=CRITICAL_VALUE_REPS,
    show_default=True,
    help="Null replications behind each size-corrected cutoff.",
)
@seed_option
@eta_option
@a1_rule_option
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="JSON grid; replaces the grid flags.",
)
@click.option(
    "--emit-data",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write the first replication of the first cell as CSV and stop.",
)
@workers_option
@format_option
@output_option
def simulate_command(
    scenarios: Tuple[str, ...],
    sizes: Tuple[int, ...],
    gammas: Tuple[float, ...],
    dimensions: Tuple[int, ...],
    method_names: Tuple[str, ...],
    lams: Tuple[float, ...],
    size_corrected: bool,
    reps: int,
    chen_reps: int,
    critical_reps: int,
    seed: int,
    eta: float,
    a1_twos_rule: str,
    config_path: Optional[Path],
    emit_data: Optional[Path],
    workers: int,
    fmt: str,
    output: Optional[Path],
):
    """Rejection rates over a grid of scenarios, sample sizes and ratios."""
    if config_path is not None:
        grid = SimulationGrid.model_validate(read_json_config(config_path))
    else:
        if gammas and dimensions:
            raise ConfigError("give either --p or --gamma, not both")
        if not gammas and not dimensions:
            gammas = DEFAULT_GAMMAS
        grid = _grid_from_flags(
            scenarios,
            sizes,
            gammas,
            dimensions,
            build_methods(
                method_names or ("rlrt", "clrt", "lw", "chen"),
                lams,
                size_corrected,
            ),
            reps,
            chen_reps,
            seed,
            eta,
            critical_reps,
            a1_twos_rule,
        )
    config = SimulateConfig(
        grid=grid,
        emit_data=str(emit_data) if emit_data else None,
        output_format=fmt,
        output=str(output) if output else None,
    )

    if config.emit_data:
        write_data_matrix(cell_data(config.grid), Path(config.emit_data))
        logger.info("wrote data to %s", config.emit_data)
        return

    rows = []
    for cell in run_grid(config.grid, workers=workers):
        row = cell.model_dump()
        row["lambda"] = row.pop("lam")
        rows.append(row)
    provenance = make_provenance(
        config.grid.master_seed, config.grid.model_dump(mode="json")
    )
    emit(rows, SIMULATE_COLUMNS, provenance, config.output_format, output)


def _analytic(
    method: MethodSpec, config: PowerCurveConfig, beta: float
) -> Optional[float]:
    if method.name not in ("rlrt", "clrt"):
        return None
    if beta == 0.0:
        return config.eta
    params = ShrinkageParams(lam=method.lam or 1.0)
    try:
        return analytic_power(
            params,
            config.setup,
            SpikedModel(spikes=[Spike(value=1.0 + beta)]),
            config.eta,
            allow_close_spike=config.allow_close_spike,
        )
    except RlrtError as exc:
        if Spike(value=1.0 + beta).is_distant(config.setup.gamma_tilde):
            raise
        logger.warning("no analytic power at beta=%g: %s", beta, exc)
        return None


@click.command("power-curve")
@method_option
@lambda_option
@click.option("--n", type=int, default=80, show_default=True)
@click.option("--p", type=int, default=None, help="Dimension.")
@click.option(
    "--gamma",
    type=float,
    default=None,
    help="p/n ratio, p = round(gamma n) [default: 0.5].",
)
@click.option(
    "--beta-grid",
    default="0.8,1.2,1.6,2.0,2.4,2.8,3.2,3.6,4.0",
    show_default=True,
    help="Comma-separated, strictly increasing spike sizes.",
)
@click.option("--reps", type=int, default=DEFAULT_REPS, show_default=True)
@seed_option
@eta_option
@click.option(
    "--allow-close-spike",
    is_flag=True,
    help="Accept |beta| <= sqrt(gamma); such rows are flagged.",
)
@workers_option
@format_option
@output_option
def power_curve_command(
    method_names: Tuple[str, ...],
    lams: Tuple[float, ...],
    n: int,
    p: Optional[int],
    gamma: Optional[float],
    beta_grid: str,
    reps: int,
    seed: int,
    eta: float,
    allow_close_spike: bool,
    workers: int,
    fmt: str,
    output: Optional[Path],
):
    """Analytic and empirical power against Sigma = I + (beta/p) J."""
    if p is None and gamma is None:
        gamma = 0.5
    config = PowerCurveConfig(
        methods=build_methods(method_names or ("rlrt", "clrt"), lams),
        setup=build_setup(n, p, gamma),
        beta_grid=parse_float_list(beta_grid),
        reps=reps,
        seed=seed,
        eta=eta,
        allow_close_spike=allow_close_spike,
        output_format=fmt,
        output=str(output) if output else None,
    )
    bound = config.setup.gamma_tilde ** 0.5

    rows = []
    for method in config.methods:
        points = empirical_power_curve(
            config.beta_grid,
            config.setup,
            method,
            config.reps,
            seed=config.seed,
            eta=config.eta,
            workers=workers,
        )
        for point in points:
            point = PowerPoint(
                beta=point.beta,
                analytic=_analytic(method, config, point.beta),
                empirical=point.empirical,
                mc_se=point.mc_se,
                close_spike=abs(point.beta) <= bound,
            )
            rows.append(
                {
                    "method": method.label,
                    "lambda": method.lam,
                    **point.model_dump(),
                }
            )
    provenance = make_provenance(config.seed, config.model_dump(mode="json"))
    emit(rows, CURVE_COLUMNS, provenance, config.output_format, output)


@click.command("density")
@click.option(
    "--method",
    "method_name",
    type=click.Choice(["rlrt", "clrt", "lw", "chen"]),
    default="rlrt",
    show_default=True,
)
@click.option(
    "--lambda",
    "lam",
    type=float,
    default=DEFAULT_LAMBDA,
    show_default=True,
    help="Shrinkage intensity for rlrt.",
)
@click.option("--scenario", default="null", show_default=True)
@a1_rule_option
@click.option("--n", type=int, default=40, show_default=True)
@click.option("--p", type=int, default=None, help="Dimension [default: 32].")
@click.option("--gamma", type=float, default=None, help="p/n ratio.")
@click.option("--reps", type=int, default=DEFAULT_REPS, show_default=True)
@click.option("--bins", type=int, default=50, show_default=True)
@click.option(
    "--scale",
    type=click.Choice(["raw", "z"]),
    default="raw",
    show_default=True,
)
@seed_option
@workers_option
@format_option
@output_option
def density_command(
    method_name: str,
    lam: float,
    scenario: str,
    a1_twos_rule: str,
    n: int,
    p: Optional[int],
    gamma: Optional[float],
    reps: int,
    bins: int,
    scale: str,
    seed: int,
    workers: int,
    fmt: str,
    output: Optional[Path],
):
    """Normalised histogram of a statistic over seeded replications."""
    if p is None and gamma is None:
        p = 32
    config = DensityConfig(
        method=MethodSpec(
            name=method_name, lam=lam if method_name == "rlrt" else None
        ),
        scenario=parse_scenario(scenario, a1_twos_rule),
        setup=build_setup(n, p, gamma),
        reps=reps,
        seed=seed,
        bins=bins,
        scale=scale,
        output_format=fmt,
        output=str(output) if output else None,
    )
    histogram = empirical_density(
        config.method,
        config.scenario,
        config.setup,
        config.reps,
        seed=config.seed,
        bins=config.bins,
        scale=config.scale,
        workers=workers,
    )
    rows = [
        {
            "method": histogram.method,
            "scenario": histogram.scenario,
            "n": histogram.n,
            "p": histogram.p,
            "reps": histogram.reps,
            "bin_left": left,
            "bin_right": right,
            "density": density,
            "mean": histogram.mean,
            "variance": histogram.variance,
        }
        for left, right, density in zip(
            histogram.edges, histogram.edges[1:], histogram.density
        )
    ]
    provenance = make_provenance(config.seed, config.model_dump(mode="json"))
    emit(rows, DENSITY_COLUMNS, provenance, config.output_format, output)


commands = [
    simulate_command,
    power_curve_command,
    density_command,
]
