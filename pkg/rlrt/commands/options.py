import logging
import re
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import click

from rlrt.config import (
    DEFAULT_ETA,
    DEFAULT_LAMBDA,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
)
from rlrt.errors import ConfigError
from rlrt.models.schemas import (
    A1_RULE_PATTERN,
    DimensionSetup,
    MethodSpec,
    Provenance,
)
from rlrt.storage.files import render_table, write_atomic

logger = logging.getLogger(__name__)

METHOD_NAMES = ("rlrt", "clrt", "lw", "chen")


def build_methods(
    names: Iterable[str], lams: Sequence[float], size_corrected: bool = False
) -> List[MethodSpec]:
    lams = list(lams) or [DEFAULT_LAMBDA]
    methods: List[MethodSpec] = []
    for name in names:
        if name == "rlrt":
            methods.extend(MethodSpec(name=name, lam=lam) for lam in lams)
        else:
            methods.append(MethodSpec(name=name))
    if size_corrected:
        methods += [
            method.model_copy(update={"size_corrected": True})
            for method in methods
        ]
    return methods


def build_setup(n: int, p: Optional[int], gamma: Optional[float]) -> DimensionSetup:
    if p is not None and gamma is not None:
        raise ConfigError("give either --p or --gamma, not both")
    if p is not None:
        return DimensionSetup(n=n, p=p)
    if gamma is None:
        raise ConfigError("one of --p or --gamma is required")
    return DimensionSetup.from_gamma(n, gamma)


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}")


def emit(
    rows: Sequence[dict],
    columns: Sequence[str],
    provenance: Provenance,
    fmt: str,
    output: Optional[Path],
):
    text = render_table(rows, columns, provenance, fmt)
    if output is None:
        click.echo(text, nl=False)
        return
    write_atomic(output, text)
    logger.info("wrote %d rows to %s", len(rows), output)


method_option = click.option(
    "--method",
    "method_names",
    type=click.Choice(METHOD_NAMES),
    multiple=True,
    help="Test to run; repeat for several.",
)
lambda_option = click.option(
    "--lambda",
    "lams",
    type=float,
    multiple=True,
    help=(
        "Shrinkage intensity in (0, 1] for rlrt; repeatable "
        f"[default: {DEFAULT_LAMBDA}]."
    ),
)
eta_option = click.option(
    "--eta",
    type=float,
    default=DEFAULT_ETA,
    show_default=True,
    help="Significance level.",
)
seed_option = click.option(
    "--seed",
    type=int,
    default=DEFAULT_SEED,
    show_default=True,
    help="Master seed of the replication streams.",
)
workers_option = click.option(
    "--workers",
    type=int,
    default=DEFAULT_WORKERS,
    show_default=True,
    help="Worker processes; results do not depend on it.",
)
format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "json"]),
    default="csv",
    show_default=True,
    help="Output format.",
)
output_option = click.option(
    "--output",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write here instead of stdout.",
)


def _check_a1_rule(
    ctx: click.Context, param: click.Parameter, value: str
) -> str:
    if re.fullmatch(A1_RULE_PATTERN, value) is None:
        raise click.BadParameter(f"{value!r} is not max, min or fixed:K")
    return value


a1_rule_option = click.option(
    "--a1-twos-rule",
    default="max",
    show_default=True,
    callback=_check_a1_rule,
    help="Number of 2's in A1: max, min or fixed:K.",
)
