import json

import numpy as np
import pytest

from rlrt.errors import ConfigError, DataFormatError
from rlrt.models.schemas import DataMatrix
from rlrt.storage.files import (
    make_provenance,
    read_data_matrix,
    read_json_config,
    render_table,
    write_atomic,
    write_data_matrix,
)


def test_round_trip(tmp_path, rng):
    path = tmp_path / "draws.csv"
    for scale in (1e3, 1.0, 1e-4, 1e-12):
        data = DataMatrix(values=rng.standard_normal((200, 7)) * scale)
        write_data_matrix(data, path)
        back = read_data_matrix(path)
        np.testing.assert_allclose(back.values, data.values, rtol=1e-15, atol=0)

    # 17 significant digits, more than the pandas fast parser keeps
    path.write_text("0.00032217777672205493\n1\n")
    values = read_data_matrix(path).values
    assert values[0, 0] == 0.00032217777672205493


def test_delimiters_and_header(write_csv):
    plain = read_data_matrix(write_csv("1,2\n3,4\n5,6\n"))
    assert plain.values.tolist() == [[1, 2], [3, 4], [5, 6]]

    header = read_data_matrix(write_csv("x,y\n1,2\n3,4\n5,6\n"))
    assert header.values.tolist() == plain.values.tolist()

    tabs = read_data_matrix(write_csv("1\t2\n3\t4\n5\t6\n", "data.tsv"))
    assert tabs.values.tolist() == plain.values.tolist()

    spaced = read_data_matrix(write_csv("1 2\n3 4\n\n5 6\n", "data.txt"))
    assert spaced.values.tolist() == plain.values.tolist()

    aligned = read_data_matrix(
        write_csv("  1     2\n 30     4\n  5  -700\n", "aligned.txt")
    )
    assert aligned.values.tolist() == [[1, 2], [30, 4], [5, -700]]
    uneven = read_data_matrix(write_csv("1 2\n3 4\n5  7\n", "uneven.txt"))
    assert uneven.values.tolist() == [[1, 2], [3, 4], [5, 7]]

    column = read_data_matrix(write_csv("0\n1\n2\n"))
    assert column.values.shape == (3, 1)


def test_transpose(write_csv):
    data = read_data_matrix(write_csv("1,3,5\n2,4,6\n"), transpose=True)
    assert data.values.tolist() == [[1, 2], [3, 4], [5, 6]]


def test_parse_errors_report_location(write_csv):
    with pytest.raises(DataFormatError) as info:
        read_data_matrix(write_csv("1,2\n3,x\n"))
    assert info.value.line == 2
    assert info.value.column == 2
    assert "line 2, column 2" in str(info.value)

    with pytest.raises(DataFormatError) as info:
        read_data_matrix(write_csv("a,b\n1,2\n\n3,nan\n"))
    assert (info.value.line, info.value.column) == (4, 2)

    with pytest.raises(DataFormatError):
        read_data_matrix(write_csv("1,2\n3,4,5\n"))
    with pytest.raises(DataFormatError):
        read_data_matrix(write_csv(""))
    with pytest.raises(DataFormatError):
        read_data_matrix(write_csv("1,2\n"))


def test_missing_file(tmp_path):
    path = tmp_path / "absent.csv"
    with pytest.raises(DataFormatError, match="absent.csv"):
        read_data_matrix(path)


def test_render_csv():
    provenance = make_provenance(7, {"reps": 10})
    text = render_table(
        [{"method": "LW", "rate": 0.1, "error": None, "extra": 1}],
        ["method", "rate", "error"],
        provenance,
    )
    lines = text.splitlines()
    assert lines[0] == "# tool: rlrt"
    assert any(line.startswith("# config_hash: ") for line in lines)
    assert "# seed: 7" in lines
    assert not any(line.startswith("# timestamp") for line in lines)
    assert lines[-2] == "method,rate,error"
    assert lines[-1] == "LW,0.10000000000000001,"


def test_render_json():
    provenance = make_provenance(None, {"reps": 10}, timestamp=True)
    text = render_table(
        [{"method": "LW", "rate": float("nan")}],
        ["method", "rate"],
        provenance,
        fmt="json",
    )
    payload = json.loads(text)
    assert payload["provenance"]["timestamp"]
    assert payload["provenance"]["config_hash"] == (
        make_provenance(None, {"reps": 10}).config_hash
    )
    assert payload["rows"] == [{"method": "LW", "rate": None}]


def test_write_atomic(tmp_path):
    path = tmp_path / "out.csv"
    write_atomic(path, "a\n")
    write_atomic(path, "b\n")
    assert path.read_text() == "b\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]


def test_read_json_config(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text('{"reps": 5}')
    assert read_json_config(path) == {"reps": 5}

    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        read_json_config(path)
    path.write_text("{oops")
    with pytest.raises(ConfigError, match="line 1"):
        read_json_config(path)
