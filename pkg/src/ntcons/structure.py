"""Structural hypotheses on a signed graph and on the noise intensity."""

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DecompositionNotFound, InvalidInput, TooLarge
from .graph import in_abs_sum, out_abs_sum
from .linalg import Definiteness, classify_definiteness


@dataclass(frozen=True)
class Decomposition:
    v1: frozenset
    v2: frozenset

    def __post_init__(self):
        object.__setattr__(self, "v1", frozenset(self.v1))
        object.__setattr__(self, "v2", frozenset(self.v2))
        if self.v1 & self.v2:
            raise InvalidInput(f"V1 and V2 overlap on {sorted(self.v1 & self.v2)}")

    @classmethod
    def from_v1(cls, g, v1):
        v1 = frozenset(v1)
        return cls(v1, frozenset(g.agents) - v1)

    def covers(self, g):
        return self.v1 | self.v2 == frozenset(g.agents)

    def as_dict(self):
        return {"v1": sorted(self.v1), "v2": sorted(self.v2)}


class Dominance(NamedTuple):
    dominated: bool
    witness: np.ndarray


def is_in_degree_dominated(g, i):
    """Check that summed in-weights dominate summed out-weights at agent ``i``.

    The witness is ``sum_{j in N_i} |A_ij| - sum_{j in N'_i} |A_ji|``; the
    agent is in-degree-dominated when it is positive semi-definite.
    """
    g._check(i)
    witness = in_abs_sum(g, i) - out_abs_sum(g, i)
    kind = classify_definiteness(witness)
    ok = kind in (
        Definiteness.POSITIVE_DEFINITE,
        Definiteness.POSITIVE_SEMIDEFINITE,
        Definiteness.ZERO,
    )
    return Dominance(ok, witness)


def _strict_successors(g):
    succ = {i: [] for i in g.agents}
    for (to, frm), w in g.weights.items():
        if w.strictly_definite:
            succ[frm].append(to)
    return succ


def pn_reachable(g, sources):
    """Agents reachable from ``sources`` through strictly definite edges only."""
    succ = _strict_successors(g)
    seen = set(sources)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return frozenset(seen)


def pn_path_exists(g, src, dst):
    g._check(src)
    g._check(dst)
    return dst in pn_reachable(g, [src])


def verify_decomposition(g, dec):
    """Return ``(ok, diagnostics)`` for a candidate ``V1 / V2`` split.

    Each ``V2`` agent must be reachable from ``V1`` along a positive-negative
    path and must be in-degree-dominated.  Diagnostics are strings naming
    the agent and the clause it fails.
    """
    if not dec.covers(g):
        missing = sorted(frozenset(g.agents) - dec.v1 - dec.v2)
        return False, [f"agents {missing} are in neither V1 nor V2"]
    reach = pn_reachable(g, dec.v1)
    diagnostics = []
    for j in sorted(dec.v2):
        if j not in reach:
            diagnostics.append(f"agent {j}: no positive-negative path from V1")
        if not is_in_degree_dominated(g, j).dominated:
            diagnostics.append(f"agent {j}: not in-degree-dominated")
    return not diagnostics, diagnostics


def find_decomposition(g, max_n=16):
    """Smallest valid ``V1`` by exhaustive search, ties broken lexicographically.

    Agents that are not in-degree-dominated can never sit in ``V2``, so they
    are placed in ``V1`` up front and only the remaining agents are searched.
    ``V1 = all agents`` is always valid, so the search cannot come up empty
    on a well-formed graph.
    """
    if g.n_agents > max_n:
        raise TooLarge(f"{g.n_agents} agents exceeds exhaustive search limit {max_n}")
    forced = frozenset(i for i in g.agents if not is_in_degree_dominated(g, i).dominated)
    free = [i for i in g.agents if i not in forced]
    for k in range(len(free) + 1):
        for extra in itertools.combinations(free, k):
            dec = Decomposition.from_v1(g, forced | frozenset(extra))
            if verify_decomposition(g, dec)[0]:
                return dec
    raise DecompositionNotFound("no admissible decomposition")


def check_bounded_weights(graphs):
    """Largest absolute weight entry over a finite family of graphs.

    Accepts an iterable of graphs or any object with a ``graphs`` mapping.
    A finite family is always bounded, so ``ok`` is reported as ``True``.
    """
    if hasattr(graphs, "graphs"):
        graphs = graphs.graphs.values()
    bound = 0.0
    for g in graphs:
        for w in g.weights.values():
            bound = max(bound, float(np.max(np.abs(w.matrix))))
    return bound, True


@dataclass(frozen=True)
class NoiseIntensity:
    """Multiplicative noise intensity ``f`` applied to relative states.

    ``func`` acts on arrays whose last axis is the agent dimension.
    """

    kind: str
    lipschitz_bound: float
    kappa: Optional[float] = None
    func: Optional[Callable] = None
    tag: str = ""

    @classmethod
    def linear(cls, kappa):
        kappa = float(kappa)
        if kappa < 0:
            raise InvalidInput("linear intensity needs kappa >= 0")
        return cls("linear", kappa, kappa=kappa, tag=f"linear:{kappa:g}")

    @classmethod
    def custom(cls, func, bound, tag="custom"):
        return cls("custom", float(bound), func=func, tag=tag)

    @property
    def is_zero(self):
        return self.kind == "linear" and self.kappa == 0.0

    def __call__(self, x):
        if self.kind == "linear":
            return self.kappa * np.asarray(x, dtype=float)
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)


class LipschitzCheck(NamedTuple):
    ok: bool
    observed_ratio_max: float
    empirical: bool


def check_lipschitz(f, samples):
    """Test ``|f(x)| <= bound * |x|``; exact for linear intensities, sampled otherwise."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise InvalidInput("no samples")
    norms = np.linalg.norm(samples, axis=-1)
    if np.any(norms == 0.0):
        raise InvalidInput("zero-vector sample")
    if f.kind == "linear":
        return LipschitzCheck(True, f.kappa, False)
    ratios = np.linalg.norm(f(samples), axis=-1) / norms
    observed = float(np.max(ratios))
    return LipschitzCheck(observed <= f.lipschitz_bound * (1 + 1e-12), observed, True)
