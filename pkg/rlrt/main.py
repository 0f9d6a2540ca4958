import logging

import click
from pydantic import ValidationError

from rlrt import __version__
from rlrt.commands import experiments, inference
from rlrt.config import LOG_LEVEL
from rlrt.errors import RlrtError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _validation_message(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        where = ".".join(str(item) for item in error["loc"])
        parts.append(f"{where}: {error['msg']}" if where else error["msg"])
    return "invalid configuration: " + "; ".join(parts)


class RlrtGroup(click.Group):
    """Exit status 1 for every failure; 2 is reserved for rejections."""

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as exc:
            exc.exit_code = 1
            raise

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = 1
            raise
        except RlrtError as exc:
            error = click.ClickException(str(exc))
            error.exit_code = exc.exit_code
            raise error from exc
        except ValidationError as exc:
            raise click.ClickException(_validation_message(exc)) from exc


@click.group(cls=RlrtGroup)
@click.version_option(__version__, prog_name="rlrt")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=LOG_LEVEL,
    show_default=True,
)
def cli(log_level: str):
    """Regularized likelihood ratio test for a high-dimensional covariance."""
    logging.basicConfig(level=log_level.upper(), format=LOG_FORMAT)


for command in inference.commands + experiments.commands:
    cli.add_command(command)
