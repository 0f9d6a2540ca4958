import io

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from rlrt.main import cli
from rlrt.models.schemas import DataMatrix


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def invoke(runner):
    def _invoke(*args):
        return runner.invoke(cli, [str(arg) for arg in args])

    return _invoke


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def null_data(rng):
    return DataMatrix(values=rng.standard_normal((60, 20)))


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


@pytest.fixture
def read_table():
    def _read(text):
        return pd.read_csv(io.StringIO(text), comment="#")

    return _read
