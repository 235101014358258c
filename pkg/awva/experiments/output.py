"""
CSV writers for traces, sweep tables and plot data.

Floats are written with repr() so that re-reading a file restores the exact
values; a fixed config therefore yields byte-identical files.
"""

import csv
import logging
import math
import os
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

from awva.errors import OutputError

logger = logging.getLogger(__name__)


def ensure_output_dir(path) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise OutputError(f'cannot create output directory {path}: {e}') from e
    return str(path)


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    if value is None:
        return ''
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """
    Write a header line plus rows

    Raises:
        OutputError: the file cannot be written (path in message)
    """
    try:
        with open(path, 'w', newline='', encoding='utf-8') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
    except OSError as e:
        raise OutputError(f'cannot write {path}: {e}') from e
    logger.debug(f'wrote {path}')
    return str(path)


def write_columns(path, columns: Mapping[str, np.ndarray]) -> str:
    """Column-oriented table; every column must have the same length"""
    names = list(columns)
    arrays = [np.asarray(columns[name], dtype=np.float64).tolist() for name in names]
    lengths = {len(array) for array in arrays}
    if len(lengths) > 1:
        raise OutputError(f'columns of {path} differ in length: {sorted(lengths)}')
    return write_csv(path, names, zip(*arrays))


def write_records(path, records: Sequence[Mapping[str, object]]) -> str:
    """Rows of dicts sharing the first record's keys"""
    if not records:
        raise OutputError(f'nothing to write to {path}')
    header = list(records[0])
    return write_csv(path, header, ([record[key] for key in header] for record in records))


def write_plot_data(path, curves: Dict[str, Tuple[Sequence[float], Sequence[float]]]) -> str:
    """Long-format `curve,x,y` rows for external plotting"""
    rows = []
    for name, (xs, ys) in curves.items():
        xs = np.asarray(xs, dtype=np.float64).tolist()
        ys = np.asarray(ys, dtype=np.float64).tolist()
        if len(xs) != len(ys):
            raise OutputError(f'curve {name!r} has {len(xs)} x values and {len(ys)} y values')
        rows.extend((name, x, y) for x, y in zip(xs, ys))
    return write_csv(path, ('curve', 'x', 'y'), rows)
