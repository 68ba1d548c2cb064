"""Monte Carlo ensembles of sample paths and convergence diagnostics.

Paths are split into batches of a fixed size that does not depend on the
number of worker threads.  Each path's output is bit-identical however it is
batched, and the statistics are computed from the per-path values after
sorting them, with compensated summation.  Thread count, path order and
merging of partial ensembles therefore cannot change a single bit of the
result.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .sde import simulate_batch, squared_errors

THREADS_ENV = "NTCONS_THREADS"
DEFAULT_BATCH = 50
DEFAULT_SUBSAMPLE = 100


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def sorted_sum(values):
    """Neumaier-compensated sum along axis 0, taken in sorted order."""
    v = np.sort(values, axis=0)
    total = np.zeros(v.shape[1:])
    comp = np.zeros(v.shape[1:])
    for row in v:
        t = total + row
        comp += np.where(np.abs(total) >= np.abs(row), (total - t) + row, (row - t) + total)
        total = t
    return total + comp


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    times: np.ndarray
    ms_error: np.ndarray
    stderr: np.ndarray
    n_paths: int
    master_seed: int
    paths: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)

    @classmethod
    def from_samples(cls, times, paths, samples, master_seed):
        """Statistics from per-path squared errors of shape (paths, grid, N)."""
        m = samples.shape[0]
        if m < 1:
            raise InvalidInput("empty ensemble")
        mean = sorted_sum(samples) / m
        if m > 1:
            dev = samples - mean
            stderr = np.sqrt(sorted_sum(dev * dev) / (m - 1) / m)
        else:
            stderr = np.zeros_like(mean)
        return cls(times, mean, stderr, m, master_seed, np.asarray(paths), samples)


def merge_ensembles(a, b):
    """Pool two ensembles over disjoint paths of the same configuration."""
    if a.master_seed != b.master_seed or not np.array_equal(a.times, b.times):
        raise InvalidInput("ensembles differ in seed or time grid")
    if set(a.paths.tolist()) & set(b.paths.tolist()):
        raise InvalidInput("ensembles share sample paths")
    paths = np.concatenate([a.paths, b.paths])
    samples = np.concatenate([a.samples, b.samples])
    return EnsembleStats.from_samples(a.times, paths, samples, a.master_seed)


def run_ensemble(cfg, m=None, subsample=DEFAULT_SUBSAMPLE, paths=None, threads=None,
                 batch_size=DEFAULT_BATCH):
    """Simulate ``m`` independent paths and average the per-agent squared errors.

    Parameters
    ----------
    cfg : SimConfig
        ``cfg.seed`` is the master seed; path ``k`` draws from the stream
        keyed by ``(seed, k)``.
    m : int
        Number of paths, ``0..m-1``.  Ignored when ``paths`` is given.
    subsample : int
        Keep every ``subsample``-th grid point.
    paths : iterable of int, optional
        Explicit path indices, e.g. one half of a split ensemble.
    threads : int, optional
        Worker threads; defaults to ``$NTCONS_THREADS`` or 1.
    batch_size : int
        Paths integrated together in one vectorised batch.
    """
    paths = list(range(m)) if paths is None else list(paths)
    if paths is None or len(paths) < 1:
        raise InvalidInput("need at least one path")
    if m is not None and len(paths) == m and m < 2:
        raise InvalidInput("an ensemble needs m >= 2")
    threads = threads or default_threads()
    batches = [paths[k:k + batch_size] for k in range(0, len(paths), batch_size)]
    theta = cfg.theta
    N = cfg.schedule.n_agents

    def work(batch):
        times, states = simulate_batch(cfg, batch, subsample)
        return times, squared_errors(states, theta, N)

    if threads == 1:
        results = [work(b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, batches))
    times = results[0][0]
    samples = np.concatenate([r[1] for r in results])
    return EnsembleStats.from_samples(times, paths, samples, cfg.seed)


CONVERGING = "Converging"
PLATEAU = "Plateau"
DIVERGING = "Diverging"


@dataclass
class AgentConvergence:
    agent: int
    initial: float
    mid: float
    final: float
    ratio: float
    trend: bool
    verdict: str

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class ConvergenceReport:
    window: float
    agents: list

    @property
    def verdicts(self):
        return [a.verdict for a in self.agents]

    @property
    def all_converging(self):
        return all(v == CONVERGING for v in self.verdicts)

    @property
    def overall(self):
        if self.all_converging:
            return CONVERGING
        if any(v == DIVERGING for v in self.verdicts):
            return DIVERGING
        return PLATEAU

    def as_dict(self):
        return {"window": self.window, "overall": self.overall,
                "agents": [a.as_dict() for a in self.agents]}


def window_means(curve, window):
    """Means of ``curve`` over its first, middle and last ``window`` fraction."""
    n = curve.shape[0]
    w = max(1, int(round(window * n)))
    start = (n - w) // 2
    return curve[:w].mean(axis=0), curve[start:start + w].mean(axis=0), curve[n - w:].mean(axis=0)


def convergence_report(stats, window=0.1):
    """Classify each agent's mean-square error curve.

    Converging: final/initial window ratio below 0.1 and the window means
    strictly decrease.  Diverging: final window above ten times the initial
    one.  Anything else is a plateau.  These thresholds are package policy.
    """
    if not 0 < window < 1:
        raise InvalidInput("window must lie in (0, 1)")
    initial, mid, final = window_means(stats.ms_error, window)
    agents = []
    for i in range(stats.ms_error.shape[1]):
        a, b, c = float(initial[i]), float(mid[i]), float(final[i])
        if a == 0.0 and c == 0.0:
            ratio, trend = 0.0, b == 0.0
        else:
            ratio = c / a if a > 0 else float("inf")
            trend = c < b < a
        if ratio < 0.1 and trend:
            verdict = CONVERGING
        elif c > 10 * a:
            verdict = DIVERGING
        else:
            verdict = PLATEAU
        agents.append(AgentConvergence(i + 1, a, b, c, ratio, trend, verdict))
    return ConvergenceReport(window, agents)
