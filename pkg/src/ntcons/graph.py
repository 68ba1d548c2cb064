"""Signed matrix-weighted directed graphs and their block Laplacian.

Agents are labelled ``1..N``.  An edge keyed ``(i, j)`` runs from agent
``j`` to agent ``i`` and carries the symmetric weight ``A_ij``, i.e. agent
``i`` listens to agent ``j``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidGraph, InvalidInput
from .linalg import Definiteness, classify_definiteness, is_symmetric


@dataclass(frozen=True, eq=False)
class SignedMatrixWeight:
    matrix: np.ndarray
    cls: Definiteness

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.array(matrix, dtype=float, ndmin=2)
        kind = classify_definiteness(matrix)
        if kind is Definiteness.INDEFINITE:
            raise InvalidInput("indefinite matrix cannot be an edge weight")
        matrix.setflags(write=False)
        return cls(matrix, kind)

    @property
    def sign(self):
        return self.cls.sign

    @property
    def abs(self):
        return self.sign * self.matrix

    @property
    def strictly_definite(self):
        return self.cls in (Definiteness.POSITIVE_DEFINITE, Definiteness.NEGATIVE_DEFINITE)


def msgn(w):
    """Matrix sign of an edge weight; ``None`` (absent edge) maps to 0."""
    if w is None:
        return 0
    if isinstance(w, SignedMatrixWeight):
        return w.sign
    return SignedMatrixWeight.from_matrix(w).sign


def mabs(w):
    """``sgn(w) * w``; positive semi-definite or zero."""
    if isinstance(w, SignedMatrixWeight):
        return w.abs
    w = np.array(w, dtype=float, ndmin=2)
    kind = classify_definiteness(w)
    if kind is Definiteness.INDEFINITE:
        raise InvalidInput("indefinite matrix has no matrix absolute value")
    return kind.sign * w


class Violation(NamedTuple):
    edge: tuple
    rule: str
    detail: str

    def __str__(self):
        where = f"edge {self.edge[1]}->{self.edge[0]}" if self.edge else "graph"
        return f"{where}: {self.rule} ({self.detail})"


def validate_graph(n_agents, dim, edges):
    """List every rule broken by a raw edge map.

    ``edges`` maps ``(to, from)`` to a nested list or array.  The graph is
    admissible exactly when the returned list is empty.
    """
    out = []
    if not isinstance(n_agents, int) or n_agents < 1:
        out.append(Violation((), "n_agents", f"must be a positive integer, got {n_agents!r}"))
    if not isinstance(dim, int) or dim < 1:
        out.append(Violation((), "dim", f"must be a positive integer, got {dim!r}"))
    if out:
        return out
    for (i, j), raw in edges.items():
        key = (i, j)
        if not (1 <= i <= n_agents and 1 <= j <= n_agents):
            out.append(Violation(key, "index", f"agents must lie in 1..{n_agents}"))
            continue
        if i == j:
            out.append(Violation(key, "self-loop", "edges must join distinct agents"))
            continue
        try:
            m = np.array(raw, dtype=float, ndmin=2)
        except (TypeError, ValueError) as exc:
            out.append(Violation(key, "parse", str(exc)))
            continue
        if m.shape != (dim, dim):
            out.append(Violation(key, "dimension", f"expected {dim}x{dim}, got {m.shape}"))
            continue
        if not np.all(np.isfinite(m)):
            out.append(Violation(key, "finite", "non-finite entry"))
            continue
        if not is_symmetric(m):
            out.append(Violation(key, "symmetry", "matrix differs from its transpose"))
            continue
        if classify_definiteness(m) is Definiteness.INDEFINITE:
            out.append(Violation(key, "indefinite", "eigenvalues of both signs"))
    return out


@dataclass(frozen=True, eq=False)
class MatrixGraph:
    n_agents: int
    dim: int
    weights: dict = field(repr=False)

    @classmethod
    def from_edges(cls, n_agents, dim, edges):
        """Build a graph, dropping zero matrices and rejecting bad weights."""
        violations = validate_graph(n_agents, dim, edges)
        if violations:
            raise InvalidGraph(violations)
        weights = {}
        for key, raw in sorted(edges.items()):
            w = SignedMatrixWeight.from_matrix(raw)
            if w.cls is not Definiteness.ZERO:
                weights[key] = w
        return cls(n_agents, dim, weights)

    @classmethod
    def empty(cls, n_agents, dim):
        return cls(n_agents, dim, {})

    @property
    def agents(self):
        return range(1, self.n_agents + 1)

    @property
    def edges(self):
        """Stored edge keys ``(to, from)`` in sorted order."""
        return sorted(self.weights)

    def weight(self, i, j):
        return self.weights.get((i, j))

    def matrix(self, i, j):
        w = self.weights.get((i, j))
        return np.zeros((self.dim, self.dim)) if w is None else w.matrix

    def relabel(self, perm):
        """Graph with agent ``k`` renamed ``perm[k]`` (``perm`` maps labels to labels)."""
        weights = {(perm[i], perm[j]): w for (i, j), w in self.weights.items()}
        return MatrixGraph(self.n_agents, self.dim, dict(sorted(weights.items())))

    def __eq__(self, other):
        if not isinstance(other, MatrixGraph):
            return NotImplemented
        return (
            (self.n_agents, self.dim) == (other.n_agents, other.dim)
            and self.weights.keys() == other.weights.keys()
            and all(np.array_equal(w.matrix, other.weights[k].matrix) for k, w in self.weights.items())
        )

    __hash__ = None

    def _check(self, i):
        if not 1 <= i <= self.n_agents:
            raise IndexError(f"agent {i} out of range 1..{self.n_agents}")


class NeighborSets(NamedTuple):
    in_: frozenset
    out: frozenset
    negative_in: frozenset
    positive_in: frozenset


def neighbor_sets(g, i):
    """In-neighbours, out-neighbours and the signed split of the in-neighbours."""
    g._check(i)
    in_, out, neg, pos = set(), set(), set(), set()
    for (a, b), w in g.weights.items():
        if a == i:
            in_.add(b)
            (neg if w.sign < 0 else pos).add(b)
        if b == i:
            out.add(a)
    return NeighborSets(frozenset(in_), frozenset(out), frozenset(neg), frozenset(pos))


def antagonized_set(g):
    """Agents with at least one incoming negative edge."""
    return frozenset(i for (i, _), w in g.weights.items() if w.sign < 0)


def in_abs_sum(g, i, among=None):
    total = np.zeros((g.dim, g.dim))
    for (a, b), w in g.weights.items():
        if a == i and (among is None or b in among):
            total += w.abs
    return total


def out_abs_sum(g, i):
    total = np.zeros((g.dim, g.dim))
    for (a, b), w in g.weights.items():
        if b == i:
            total += w.abs
    return total


def block(M, i, j, d):
    """View of the ``(i, j)`` block (1-based labels) of a block matrix."""
    return M[(i - 1) * d:i * d, (j - 1) * d:j * d]


def laplacian(g):
    """Signed block Laplacian: ``L_ij = -A_ij`` off the diagonal, ``L_ii = sum_k |A_ik|``."""
    d = g.dim
    L = np.zeros((g.n_agents * d, g.n_agents * d))
    for (i, j), w in g.weights.items():
        block(L, i, j, d)[...] = -w.matrix
        block(L, i, i, d)[...] += w.abs
    return L
