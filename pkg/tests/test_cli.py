import json
import math

import numpy as np
import pytest

from rlrt import __version__
from rlrt.errors import DataFormatError


def simulate_args(*extra):
    return (
        "simulate",
        "--scenario", "null",
        "--scenario", "a2",
        "--n", 20,
        "--gamma", 0.2,
        "--gamma", 0.5,
        "--method", "rlrt",
        "--method", "lw",
        "--reps", 30,
        "--seed", 9,
    ) + extra


def test_version(invoke):
    result = invoke("--version")
    assert result.exit_code == 0
    assert __version__ in result.output


def test_test_command(invoke, write_csv, read_table):
    path = write_csv("0\n1\n2\n")
    result = invoke("test", path, "--method", "rlrt", "--lambda", 0.5)
    assert result.exit_code == 0, result.output
    assert "# timestamp: " in result.output
    table = read_table(result.output)
    assert list(table.columns) == [
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
    ]
    row = table.iloc[0]
    assert row["method"] == "rLRT(0.5)"
    assert (row["n"], row["p"]) == (3, 1)
    assert row["gamma_tilde"] == pytest.approx(0.5)
    assert row["raw"] == pytest.approx(0.0, abs=1e-15)


def test_test_command_json(invoke, write_csv, rng):
    lines = "\n".join(
        ",".join(f"{v:.17g}" for v in row)
        for row in rng.standard_normal((50, 5))
    )
    path = write_csv(lines + "\n")
    result = invoke(
        "test", path,
        "--method", "rlrt",
        "--lambda", 0.3,
        "--lambda", 0.7,
        "--method", "clrt",
        "--method", "lw",
        "--method", "chen",
        "--format", "json",
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["provenance"]["tool"] == "rlrt"
    assert payload["provenance"]["seed"] is None
    methods = [row["method"] for row in payload["rows"]]
    assert methods == ["rLRT(0.3)", "rLRT(0.7)", "cLRT", "LW", "Chen"]
    for row in payload["rows"]:
        assert 0.0 <= row["p_value"] <= 1.0
        assert row["reject"] == (row["p_value"] < row["eta"])


def test_test_command_errors(invoke, write_csv, tmp_path):
    missing = tmp_path / "nowhere.csv"
    result = invoke("test", missing)
    assert result.exit_code == 1
    assert "nowhere.csv" in result.output

    result = invoke("test", write_csv("1,2\n3,x\n4,5\n"))
    assert result.exit_code == 1
    assert "line 2, column 2" in result.output

    wide = "\n".join(",".join(["1", "2", "3", "4"]) for _ in range(3))
    result = invoke("test", write_csv(wide + "\n"), "--method", "clrt")
    assert result.exit_code == 1
    assert "gamma_tilde" in result.output

    result = invoke("test", write_csv("0\n1\n2\n"), "--eta", 1.5)
    assert result.exit_code == 1


def test_error_exit_code_comes_from_the_error(invoke, tmp_path, monkeypatch):
    monkeypatch.setattr(DataFormatError, "exit_code", 3)
    result = invoke("test", tmp_path / "nowhere.csv")
    assert result.exit_code == 3
    assert "nowhere.csv" in result.output


def test_exit_on_reject(invoke, write_csv, rng):
    values = rng.standard_normal((60, 10)) * 3.0
    text = "\n".join(",".join(f"{v:.17g}" for v in row) for row in values)
    path = write_csv(text + "\n")

    result = invoke("test", path)
    assert result.exit_code == 0
    result = invoke("test", path, "--exit-on-reject")
    assert result.exit_code == 2
    assert "True" in result.output


def test_transpose_flag(invoke, write_csv, read_table):
    result = invoke("test", write_csv("0,1,2\n"), "--transpose")
    assert result.exit_code == 0, result.output
    row = read_table(result.output).iloc[0]
    assert (row["n"], row["p"]) == (3, 1)


def test_null_params(invoke, read_table):
    result = invoke("null-params", "--lambda", 1.0, "--n", 161, "--p", 80)
    assert result.exit_code == 0, result.output
    row = read_table(result.output).iloc[0]
    assert row["gamma_tilde"] == pytest.approx(0.5)
    assert row["mu"] == pytest.approx(-math.log(0.5) / 2.0, rel=1e-10)
    assert row["v"] == pytest.approx(-2.0 * math.log(0.5) - 1.0, rel=1e-10)

    result = invoke("null-params", "--n", 81, "--gamma", 1.0)
    assert result.exit_code == 1
    assert "gamma_tilde" in result.output

    result = invoke("null-params", "--n", 81, "--p", 40, "--gamma", 0.5)
    assert result.exit_code == 1
    result = invoke("null-params", "--lambda", 1.5, "--n", 81, "--p", 40)
    assert result.exit_code == 1


def test_usage_errors_exit_with_one(invoke, tmp_path):
    assert invoke("test", "--no-such-flag").exit_code == 1
    assert invoke("no-such-command").exit_code == 1
    assert invoke("simulate", "--reps", 0).exit_code == 1
    result = invoke("critical-value", "--n", 20, "--p", 4, "--reps", 999)
    assert result.exit_code == 1

    config = tmp_path / "grid.json"
    config.write_text(
        json.dumps(
            {
                "scenarios": [{"kind": "null"}],
                "sample_sizes": [20],
                "gammas": [0.5],
                "methods": [{"name": "lw"}],
                "reps": 5,
                "workers": 3,
            }
        )
    )
    result = invoke("simulate", "--config", config)
    assert result.exit_code == 1
    assert "workers" in result.output


def test_simulate(invoke, read_table):
    result = invoke(*simulate_args())
    assert result.exit_code == 0, result.output
    assert "# seed: 9" in result.output
    assert "# timestamp" not in result.output
    table = read_table(result.output)
    assert len(table) == 2 * 2 * 2
    assert list(table["scenario"].unique()) == ["Null", "A2"]
    assert set(table["method"]) == {"rLRT(0.5)", "LW"}
    assert table["rate"].between(0.0, 1.0).all()
    assert (table["reps"] == 30).all()


def test_simulate_by_dimension(invoke, read_table):
    args = simulate_args()[:7] + ("--p", 4, "--p", 10) + simulate_args()[11:]
    result = invoke(*args)
    assert result.exit_code == 0, result.output
    table = read_table(result.output)
    assert list(table["p"]) == [4, 4, 10, 10] * 2
    assert table["gamma"].tolist() == [0.2, 0.2, 0.5, 0.5] * 2

    result = invoke(*simulate_args("--p", 4))
    assert result.exit_code == 1
    assert "--p" in result.output


def test_a1_rule_checked_without_a1_scenario(invoke):
    result = invoke(*simulate_args("--a1-twos-rule", "most"))
    assert result.exit_code == 1
    assert "most" in result.output
    result = invoke(*simulate_args("--a1-twos-rule", "fixed:x"))
    assert result.exit_code == 1
    result = invoke("density", "--reps", 10, "--a1-twos-rule", "most")
    assert result.exit_code == 1

    result = invoke(*simulate_args("--a1-twos-rule", "fixed:2"))
    assert result.exit_code == 0, result.output


def test_simulate_is_reproducible(invoke, read_table):
    first = read_table(invoke(*simulate_args()).output)
    second = read_table(invoke(*simulate_args("--workers", 2)).output)
    columns = [c for c in first.columns if c != "elapsed"]
    assert first[columns].equals(second[columns])

    other = read_table(invoke(*simulate_args("--seed", 10)).output)
    assert not first["rate"].equals(other["rate"])


def test_simulate_config_file(invoke, tmp_path):
    config = tmp_path / "grid.json"
    config.write_text(
        json.dumps(
            {
                "scenarios": [{"kind": "cs_beta", "beta": 4.0}],
                "sample_sizes": [30],
                "gammas": [0.5],
                "methods": [{"name": "rlrt", "lam": 0.5}, {"name": "clrt"}],
                "reps": 20,
                "master_seed": 4,
            }
        )
    )
    result = invoke("simulate", "--config", config, "--format", "json")
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["provenance"]["seed"] == 4
    assert [row["method"] for row in payload["rows"]] == ["rLRT(0.5)", "cLRT"]
    assert all(row["p"] == 15 for row in payload["rows"])


def test_simulate_emit_data(invoke, tmp_path, read_table):
    target = tmp_path / "cell.csv"
    result = invoke(*simulate_args("--emit-data", target))
    assert result.exit_code == 0, result.output
    assert result.output == ""
    values = np.loadtxt(target, delimiter=",")
    assert values.shape == (20, 4)

    result = invoke("test", target, "--method", "lw")
    assert result.exit_code == 0, result.output
    row = read_table(result.output).iloc[0]
    assert (row["n"], row["p"]) == (20, 4)


def test_simulate_output_file(invoke, tmp_path, read_table):
    target = tmp_path / "rates.csv"
    result = invoke(*simulate_args("--output", target))
    assert result.exit_code == 0, result.output
    assert result.output == ""
    assert len(read_table(target.read_text())) == 8


def test_power_curve(invoke, read_table):
    args = (
        "power-curve",
        "--n", 20,
        "--gamma", 0.5,
        "--lambda", 0.5,
        "--beta-grid", "1.0,2.0,4.0",
        "--reps", 20,
        "--seed", 3,
    )
    result = invoke(*args)
    assert result.exit_code == 0, result.output
    table = read_table(result.output)
    assert list(table.columns) == [
        "beta",
        "method",
        "lambda",
        "analytic",
        "empirical",
        "mc_se",
        "close_spike",
    ]
    assert len(table) == 6
    for _, rows in table.groupby("method", sort=False):
        assert rows["beta"].is_monotonic_increasing
        assert rows["analytic"].between(0.0, 1.0).all()
        assert not rows["close_spike"].any()

    result = invoke(*args[:-6], "--beta-grid", "0.3,2.0", "--reps", 20)
    assert result.exit_code == 1
    assert "--allow-close-spike" in result.output

    result = invoke(
        *args[:-6], "--beta-grid", "0.3,2.0", "--reps", 20, "--allow-close-spike"
    )
    assert result.exit_code == 0, result.output
    table = read_table(result.output)
    assert table.loc[table["beta"] == 0.3, "close_spike"].all()
    assert not table.loc[table["beta"] == 2.0, "close_spike"].any()

    result = invoke(*args[:-6], "--beta-grid", "2.0,1.0", "--reps", 20)
    assert result.exit_code == 1


def test_critical_value(invoke, read_table):
    args = ("critical-value", "--method", "lw", "--n", 20, "--p", 5, "--seed", 2)
    result = invoke(*args, "--reps", 1000)
    assert result.exit_code == 0, result.output
    row = read_table(result.output).iloc[0]
    assert row["method"] == "LW"
    assert row["scale"] == "z"
    assert math.isfinite(row["critical_value"])
    again = read_table(invoke(*args, "--reps", 1000).output).iloc[0]
    assert again["critical_value"] == row["critical_value"]


def test_density(invoke, read_table):
    result = invoke(
        "density", "--n", 20, "--p", 8, "--reps", 100, "--bins", 10, "--seed", 1
    )
    assert result.exit_code == 0, result.output
    table = read_table(result.output)
    assert len(table) == 10
    widths = table["bin_right"] - table["bin_left"]
    assert (table["density"] * widths).sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(
        table["bin_left"].to_numpy()[1:], table["bin_right"].to_numpy()[:-1]
    )
    assert table["mean"].nunique() == 1
