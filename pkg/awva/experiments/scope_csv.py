"""
Oscilloscope CSV import.

A scope export is a header line followed by rows of a time column and one
or more voltage columns. Lines starting with '#' are comments. The time axis
must be uniform within 0.1 %; it is never resampled.
"""

import csv
import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from awva.errors import ScopeFormatError, ScopeParseError
from awva.models import SampledTrace

logger = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-3
TIME_COLUMN = 'time_s'


def _read_rows(path):
    try:
        with open(path, newline='', encoding='utf-8') as fh:
            for line_number, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].lstrip().startswith('#'):
                    continue
                yield line_number, [cell.strip() for cell in row]
    except (OSError, UnicodeDecodeError) as e:
        raise ScopeParseError(f'cannot read scope file: {e}', path) from e


def _time_column(header: Sequence[str], path) -> int:
    if TIME_COLUMN in header:
        return header.index(TIME_COLUMN)
    for index, name in enumerate(header):
        if name.lower().startswith('time'):
            return index
    raise ScopeParseError(f"missing time column (expected {TIME_COLUMN!r} or a 'time*' header)", path, 1)


def read_scope_columns(path, columns: Optional[Sequence[str]] = None) -> Dict[str, SampledTrace]:
    """
    Parse a scope CSV into traces on its (validated) time grid

    Args:
        path: CSV file
        columns: Value columns to return; None returns every non-time column

    Returns:
        Column name -> SampledTrace, in header order

    Raises:
        ScopeParseError: unreadable file, missing column or malformed row
        ScopeFormatError: non-uniform or non-increasing time axis
    """
    rows = _read_rows(path)
    try:
        header_line, header = next(rows)
    except StopIteration:
        raise ScopeParseError('file is empty', path) from None

    time_index = _time_column(header, path)
    if columns is None:
        columns = [name for i, name in enumerate(header) if i != time_index]
    indices = []
    for name in columns:
        if name not in header:
            raise ScopeParseError(f'missing column {name!r}', path, header_line)
        indices.append(header.index(name))

    times = []
    values = [[] for _ in indices]
    for line_number, row in rows:
        if len(row) != len(header):
            raise ScopeParseError(f'expected {len(header)} fields, got {len(row)}', path, line_number)
        try:
            times.append(float(row[time_index]))
            for target, index in zip(values, indices):
                target.append(float(row[index]))
        except ValueError as e:
            raise ScopeParseError(f'malformed number: {e}', path, line_number) from e

    if len(times) < 2:
        raise ScopeParseError('need at least two samples', path)
    start, dt = _validate_grid(np.asarray(times), path)
    traces = {name: SampledTrace(start, dt, column) for name, column in zip(columns, values)}
    logger.debug(f'read {len(times)} samples x {len(traces)} columns from {path} (dt={dt!r} s)')
    return traces


def _validate_grid(times: np.ndarray, path) -> Tuple[float, float]:
    dt = float(times[1] - times[0])
    if not dt > 0.0:
        raise ScopeFormatError(f'time axis is not increasing (dt={dt!r})', path)
    steps = np.diff(times)
    deviation = np.abs(steps - dt)
    worst = int(np.argmax(deviation))
    if deviation[worst] > GRID_TOLERANCE * dt:
        raise ScopeFormatError(
            f'non-uniform time step {steps[worst]!r} s after sample {worst} (expected {dt!r} s)', path
        )
    return float(times[0]), dt


def ingest_scope_csv(path, channels: Optional[Sequence[str]] = None) -> Tuple[SampledTrace, SampledTrace]:
    """
    Load the two input channels of a scope export on a common grid

    With channels=None the first two value columns are used.

    Raises:
        ScopeParseError: missing column, malformed row, fewer than two channels
        ScopeFormatError: time step not uniform within 0.1 %
    """
    if channels is not None and len(channels) != 2:
        raise ScopeParseError(f'exactly two channels are required, got {list(channels)!r}', path)
    traces = read_scope_columns(path, channels)
    if len(traces) < 2:
        raise ScopeParseError(f'need two channel columns, found {len(traces)}', path)
    first, second = list(traces.values())[:2]
    return first, second
