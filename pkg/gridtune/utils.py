"""
==============
gridtune.utils
==============

Helper functions that are used in multiple other modules.
"""
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import xarray as xr

FLOAT_FORMAT = "%.17g"


def to_frame(table):
    """
    Convert a result table to a ``pandas.DataFrame``.

    Args:
        table: A ``pandas.DataFrame``, an ``xarray.Dataset`` or a list of
            dicts with one dict per row.

    Returns:
        ``pandas.DataFrame`` with the coordinates of a dataset as leading
        columns.
    """
    if isinstance(table, xr.Dataset):
        return table.to_dataframe().reset_index()
    if isinstance(table, pd.DataFrame):
        return table
    return pd.DataFrame(list(table))


def write_table(table, path):
    """
    Write a result table to a CSV file.

    Floats are written with 17 significant digits so that reading the file
    reproduces them exactly. Infinity is written as ``inf``.

    Args:
        table: The table, see :py:func:`to_frame`.
        path: The output file.

    Returns:
        The ``pandas.DataFrame`` that was written.
    """
    frame = to_frame(table)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n"
    )
    return frame


def read_table(path):
    """
    Read a CSV file written by :py:func:`write_table`.
    """
    return pd.read_csv(path, float_precision="round_trip")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
        return value
    return value


def write_json(record, path):
    """
    Write a machine-readable record. Non-finite floats are written as
    strings.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as output:
        json.dump(_jsonable(record), output, indent=2, sort_keys=True)
        output.write("\n")
