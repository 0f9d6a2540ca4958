import csv
import json
import logging
import os
import re
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from rlrt import __version__
from rlrt.errors import ConfigError, DataFormatError
from rlrt.models.schemas import DataMatrix, Provenance, ResultRecord
from rlrt.utils import config_hash

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SNIFF_BYTES = 64 * 1024
DELIMITERS = ",;\t"
WHITESPACE = r"\s+"


def _delimiter(path: Path) -> str:
    with open(path, newline="", encoding="utf8") as fh:
        head = fh.read(SNIFF_BYTES)
    present = [d for d in DELIMITERS if d in head]
    if not present:
        return WHITESPACE
    if len(present) == 1:
        return present[0]
    try:
        return csv.Sniffer().sniff(head, delimiters=DELIMITERS).delimiter
    except csv.Error:
        return present[0]


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return np.nan


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_data_matrix(path: Path, transpose: bool = False) -> DataMatrix:
    """Observations in rows, variables in columns; the header row is optional."""
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"no such file: {path}")
    sep = _delimiter(path)
    try:
        frame = pd.read_csv(
            path,
            sep=sep,
            engine="python",
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError:
        raise DataFormatError(f"{path} is empty")
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        line = int(match.group(1)) if match else None
        raise DataFormatError(f"ragged row in {path}: {exc}", line=line)

    frame = frame.fillna("").apply(lambda column: column.str.strip())
    if sep == WHITESPACE:
        # leading blanks of right-aligned columns
        frame = frame.loc[:, (frame != "").any(axis=0)]
    lines = np.arange(1, len(frame) + 1)
    blank = (frame == "").all(axis=1).to_numpy()
    frame, lines = frame[~blank], lines[~blank]
    if frame.empty:
        raise DataFormatError(f"{path} holds no data")

    if not all(_is_number(cell) for cell in frame.iloc[0]):
        logger.debug("treating line %d of %s as a header", lines[0], path)
        frame, lines = frame.iloc[1:], lines[1:]

    # float() for exact decimal-to-double conversion
    values = frame.map(_to_float).to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row, column = np.argwhere(bad)[0]
        raise DataFormatError(
            f"not a finite number: {frame.iat[row, column]!r}",
            line=int(lines[row]),
            column=int(column) + 1,
        )

    if transpose:
        values = values.T
    try:
        return DataMatrix(values=values)
    except ValidationError as exc:
        raise DataFormatError(
            f"{path}: {exc.errors()[0]['msg']} (shape {values.shape})"
        )


def write_atomic(path: Path, text: str):
    """Write through a temporary sibling so readers never see a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(
        dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_data_matrix(data: DataMatrix, path: Path):
    text = pd.DataFrame(data.values).to_csv(
        header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    write_atomic(path, text)


def make_provenance(
    seed: Optional[int], payload: Dict[str, Any], timestamp: bool = False
) -> Provenance:
    return Provenance(
        version=__version__,
        seed=seed,
        config_hash=config_hash(payload),
        timestamp=(
            datetime.now(timezone.utc).isoformat(timespec="seconds")
            if timestamp
            else None
        ),
    )


def render_csv(
    rows: Sequence[Dict[str, Any]],
    columns: Sequence[str],
    provenance: Provenance,
) -> str:
    header = [
        f"# {key}: {value}"
        for key, value in provenance.model_dump().items()
        if value is not None
    ]
    frame = pd.DataFrame(list(rows), columns=list(columns))
    body = frame.to_csv(
        index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return "\n".join(header) + "\n" + body


def render_json(rows: Sequence[Dict[str, Any]], provenance: Provenance) -> str:
    record = ResultRecord(provenance=provenance, rows=list(rows))
    return json.dumps(record.model_dump(), indent=2, allow_nan=False) + "\n"


def render_table(
    rows: Sequence[Dict[str, Any]],
    columns: Sequence[str],
    provenance: Provenance,
    fmt: str = "csv",
) -> str:
    rows = nan_to_none(
        [{column: row.get(column) for column in columns} for row in rows]
    )
    if fmt == "json":
        return render_json(rows, provenance)
    return render_csv(rows, columns, provenance)


def read_json_config(path: Path) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}"
        )
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return payload


def nan_to_none(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    return [
        {
            key: None if isinstance(value, float) and np.isnan(value) else value
            for key, value in row.items()
        }
        for row in rows
    ]
