from pathlib import Path
from typing import Optional, Tuple

import click

from rlrt.commands.options import (
    build_methods,
    build_setup,
    emit,
    eta_option,
    format_option,
    lambda_option,
    method_option,
    output_option,
    seed_option,
    workers_option,
)
from rlrt.config import CRITICAL_VALUE_REPS, DEFAULT_LAMBDA
from rlrt.models.rmt import null_asymptotics
from rlrt.models.schemas import (
    CriticalValueConfig,
    MethodSpec,
    NullParamsConfig,
    ShrinkageParams,
    TestConfig,
    TestResult,
)
from rlrt.models.simulation import empirical_critical_value
from rlrt.models.statistics import evaluate_methods
from rlrt.storage.files import make_provenance, read_data_matrix

TEST_COLUMNS = (
    "method",
    "lambda",
    "n",
    "p",
    "gamma_tilde",
    "raw",
    "z",
    "p_value",
    "eta",
    "reject",
)
NULL_COLUMNS = ("lambda", "n", "p", "gamma_tilde", "mu", "v", "centering")
CRITICAL_COLUMNS = (
    "method",
    "lambda",
    "n",
    "p",
    "eta",
    "scale",
    "reps",
    "seed",
    "critical_value",
)


def result_row(result: TestResult) -> dict:
    return {
        "method": result.method,
        "lambda": result.lam,
        "n": result.setup.n,
        "p": result.setup.p,
        "gamma_tilde": result.setup.gamma_tilde,
        "raw": result.raw,
        "z": result.z,
        "p_value": result.p_value,
        "eta": result.eta,
        "reject": result.reject,
    }


@click.command("test")
@click.argument("input_path", metavar="INPUT", type=click.Path(path_type=Path))
@method_option
@lambda_option
@eta_option
@click.option(
    "--transpose",
    is_flag=True,
    help="Input holds variables in rows and observations in columns.",
)
@click.option(
    "--exit-on-reject",
    is_flag=True,
    help="Exit with status 2 when any test rejects at --eta.",
)
@format_option
@output_option
@click.pass_context
def test_command(
    ctx: click.Context,
    input_path: Path,
    method_names: Tuple[str, ...],
    lams: Tuple[float, ...],
    eta: float,
    transpose: bool,
    exit_on_reject: bool,
    fmt: str,
    output: Optional[Path],
):
    """Test H0: Sigma = I on the data in INPUT (observations in rows)."""
    config = TestConfig(
        input=str(input_path),
        methods=build_methods(method_names or ("rlrt",), lams),
        eta=eta,
        transpose=transpose,
        exit_on_reject=exit_on_reject,
        output_format=fmt,
        output=str(output) if output else None,
    )
    data = read_data_matrix(Path(config.input), transpose=config.transpose)
    results = evaluate_methods(data, config.methods, config.eta)
    provenance = make_provenance(
        None, config.model_dump(mode="json"), timestamp=True
    )
    emit(
        [result_row(result) for result in results],
        TEST_COLUMNS,
        provenance,
        config.output_format,
        output,
    )
    if config.exit_on_reject and any(result.reject for result in results):
        ctx.exit(2)


@click.command("null-params")
@click.option(
    "--lambda",
    "lam",
    type=float,
    default=DEFAULT_LAMBDA,
    show_default=True,
    help="Shrinkage intensity in (0, 1].",
)
@click.option("--n", type=int, required=True, help="Sample size.")
@click.option("--p", type=int, default=None, help="Dimension.")
@click.option(
    "--gamma", type=float, default=None, help="p/n ratio, p = round(gamma n)."
)
@format_option
@output_option
def null_params_command(
    lam: float,
    n: int,
    p: Optional[int],
    gamma: Optional[float],
    fmt: str,
    output: Optional[Path],
):
    """Null mean, variance and centering of the rLRT at gamma_tilde = p/(n-1)."""
    config = NullParamsConfig(
        lam=lam,
        setup=build_setup(n, p, gamma),
        output_format=fmt,
        output=str(output) if output else None,
    )
    setup = config.setup
    null = null_asymptotics(ShrinkageParams(lam=config.lam), setup)
    row = {
        "lambda": config.lam,
        "n": setup.n,
        "p": setup.p,
        "gamma_tilde": setup.gamma_tilde,
        "mu": null.mu,
        "v": null.v,
        "centering": null.centering,
    }
    provenance = make_provenance(None, config.model_dump(mode="json"))
    emit([row], NULL_COLUMNS, provenance, config.output_format, output)


@click.command("critical-value")
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
@click.option("--n", type=int, required=True, help="Sample size.")
@click.option("--p", type=int, default=None, help="Dimension.")
@click.option("--gamma", type=float, default=None, help="p/n ratio.")
@eta_option
@click.option(
    "--reps",
    type=int,
    default=CRITICAL_VALUE_REPS,
    show_default=True,
    help="Null replications, at least 1000.",
)
@seed_option
@click.option(
    "--scale",
    type=click.Choice(["z", "raw"]),
    default="z",
    show_default=True,
    help="Quantile of the standardised or of the raw statistic.",
)
@workers_option
@format_option
@output_option
def critical_value_command(
    method_name: str,
    lam: float,
    n: int,
    p: Optional[int],
    gamma: Optional[float],
    eta: float,
    reps: int,
    seed: int,
    scale: str,
    workers: int,
    fmt: str,
    output: Optional[Path],
):
    """Empirical (1 - eta) null quantile of a test statistic."""
    config = CriticalValueConfig(
        method=MethodSpec(
            name=method_name, lam=lam if method_name == "rlrt" else None
        ),
        setup=build_setup(n, p, gamma),
        eta=eta,
        reps=reps,
        seed=seed,
        scale=scale,
        output_format=fmt,
        output=str(output) if output else None,
    )
    value = empirical_critical_value(
        config.method,
        config.setup,
        eta=config.eta,
        reps=config.reps,
        seed=config.seed,
        scale=config.scale,
        workers=workers,
    )
    row = {
        "method": config.method.label,
        "lambda": config.method.lam,
        "n": config.setup.n,
        "p": config.setup.p,
        "eta": config.eta,
        "scale": config.scale,
        "reps": config.reps,
        "seed": config.seed,
        "critical_value": value,
    }
    provenance = make_provenance(config.seed, config.model_dump(mode="json"))
    emit([row], CRITICAL_COLUMNS, provenance, config.output_format, output)


commands = [test_command, null_params_command, critical_value_command]
