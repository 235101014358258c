"""
Monte Carlo trial pool.

Trials are split into contiguous index chunks and run in worker processes;
each worker rebuilds the noise-free context from the (picklable) config.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Tuple

from awva.errors import ConfigurationError
from awva.estimators import TrialOutcome, run_trial_range
from awva.models import TrialConfig

logger = logging.getLogger(__name__)


def split_chunks(trials: int, workers: int) -> List[Tuple[int, int]]:
    """Contiguous [start, stop) ranges, at most one per worker, sizes differing by at most one"""
    if trials < 0:
        raise ConfigurationError(f'trials must be >= 0, got {trials!r}')
    workers = max(1, min(workers, trials)) if trials else 1
    size, extra = divmod(trials, workers)
    chunks = []
    start = 0
    for i in range(workers):
        stop = start + size + (1 if i < extra else 0)
        if stop > start:
            chunks.append((start, stop))
        start = stop
    return chunks


def execute_trials(config: TrialConfig, trials: int, workers: int = 1) -> List[TrialOutcome]:
    """
    Run trials [0, trials) and return their outcomes in index order

    workers <= 1 runs in the calling process.
    """
    if workers is None or workers < 1:
        raise ConfigurationError(f'workers must be >= 1, got {workers!r}')
    chunks = split_chunks(trials, workers)
    if len(chunks) <= 1:
        return run_trial_range(config, 0, trials)

    logger.debug(f'running {trials} trials on {len(chunks)} worker processes')
    outcomes: List[TrialOutcome] = []
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(run_trial_range, config, start, stop) for start, stop in chunks]
        for future in futures:
            outcomes.extend(future.result())
    return outcomes
