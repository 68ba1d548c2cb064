"""Synthesis and certification of the grounded consensus protocol.

Given a signed graph and a target ``theta``, the agents with incoming
antagonistic edges are selected as informed agents.  Each one is coupled to
the external signal ``x0 = (1 + 2 / delta) * theta`` through the summed
absolute value of its negative in-weights, with a common coupling
coefficient ``delta`` chosen above a spectral bound ``C``.  With that choice
``1_N kron theta`` is an equilibrium of the grounded dynamics.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyV1WithAntagonism, HurwitzInconclusive, InvalidInput, OmegaSumNotPD
from .graph import antagonized_set, block, in_abs_sum, laplacian, neighbor_sets, out_abs_sum
from .linalg import Definiteness, classify_definiteness, is_hurwitz, is_positive_definite, sym_eigen
from .structure import Decomposition, verify_decomposition

DEFAULT_MARGIN = 0.1
STATIONARITY_RTOL = 1e-9


class Mode(enum.Enum):
    FIXED = "fixed"
    TIME_VARYING = "time-varying"


def omega_sum(g, i):
    """Summed absolute values of the negative in-weights of agent ``i``."""
    return in_abs_sum(g, i, among=neighbor_sets(g, i).negative_in)


def compute_Ci(g, i):
    """Half the largest eigenvalue of ``S^-1 (out_i - in_i)``.

    ``S`` is the negative in-weight sum of agent ``i``; ``out_i`` and
    ``in_i`` are its summed absolute out- and in-weights.  The eigenvalue is
    taken from the symmetric similar matrix ``S^-1/2 M S^-1/2``.
    """
    if not neighbor_sets(g, i).negative_in:
        raise OmegaSumNotPD(i, f"agent {i} has no negative in-edges")
    S = omega_sum(g, i)
    if classify_definiteness(S) is not Definiteness.POSITIVE_DEFINITE:
        raise OmegaSumNotPD(i)
    w, V = sym_eigen(S)
    root_inv = (V / np.sqrt(w)) @ V.T
    M = out_abs_sum(g, i) - in_abs_sum(g, i)
    return 0.5 * float(sym_eigen(root_inv @ M @ root_inv)[0][-1])


def grounded_laplacian(g, delta, coupling):
    """``L + (Delta kron I_d) diag(|B_1|, ..., |B_N|)`` with ``delta`` on informed agents."""
    L = laplacian(g)
    d = g.dim
    for i, B in coupling.items():
        if np.shape(B) != (d, d):
            raise InvalidInput(f"coupling of agent {i} has shape {np.shape(B)}, expected {(d, d)}")
        block(L, i, i, d)[...] += delta * np.asarray(B, dtype=float)
    return L


@dataclass(frozen=True, eq=False)
class ProtocolDesign:
    n_agents: int
    dim: int
    theta: np.ndarray
    delta: float
    k1: float
    x0: np.ndarray
    informed_set: frozenset
    coupling: dict
    grounded_laplacian: np.ndarray
    C: float
    C_by_agent: dict
    decomposition: Optional[Decomposition] = None
    anchored: bool = True
    notes: tuple = field(default_factory=tuple)

    @property
    def delta_exceeds_C(self):
        return self.delta > self.C

    def stacked_coupling(self, signal):
        """``(Delta kron I_d) B signal`` as a length ``N d`` vector."""
        d = self.dim
        out = np.zeros(self.n_agents * d)
        for i, B in self.coupling.items():
            out[(i - 1) * d:i * d] = self.delta * (B @ signal)
        return out

    @property
    def external_input(self):
        return self.stacked_coupling(self.x0)

    def stationarity_residual(self):
        target = np.tile(self.theta, self.n_agents)
        r = -self.grounded_laplacian @ target + self.k1 * self.stacked_coupling(self.theta)
        return float(np.linalg.norm(r))

    def stationarity_tolerance(self):
        return STATIONARITY_RTOL * self.n_agents * float(np.linalg.norm(self.theta))

    def with_theta(self, theta):
        """Same design steering towards a different target."""
        theta = _check_theta(theta, self.dim)
        return ProtocolDesign(
            self.n_agents, self.dim, theta, self.delta, self.k1, self.k1 * theta,
            self.informed_set, self.coupling, self.grounded_laplacian, self.C,
            self.C_by_agent, self.decomposition, self.anchored, self.notes,
        )


def _check_theta(theta, dim):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape != (dim,):
        raise InvalidInput(f"theta must have {dim} entries, got {theta.shape[0]}")
    if not np.any(theta != 0.0) or not np.all(np.isfinite(theta)):
        raise InvalidInput("theta must be a finite nonzero vector")
    return theta


def synthesize(g, dec, theta, margin=DEFAULT_MARGIN, delta=None):
    """Build the grounded protocol for ``g`` steering every agent to ``theta``.

    Parameters
    ----------
    g : MatrixGraph
    dec : Decomposition
        A split satisfying :func:`verify_decomposition`; ``C`` is the largest
        ``C_i`` over its ``V1`` agents that have negative in-edges.
    theta : array_like
        Nonzero consensus target.
    margin : float
        ``delta = C + margin`` when ``delta`` is not given.
    delta : float, optional
        Explicit coupling coefficient.  It is not required to exceed ``C``;
        ``ProtocolDesign.delta_exceeds_C`` records whether it does.
    """
    theta = _check_theta(theta, g.dim)
    ok, diagnostics = verify_decomposition(g, dec)
    if not ok:
        raise InvalidInput("decomposition is not admissible: " + "; ".join(diagnostics))
    if delta is None and not margin > 0:
        raise InvalidInput("margin must be positive")
    if delta is not None and not delta > 0:
        raise InvalidInput("delta must be positive")

    notes = []
    informed = antagonized_set(g)
    C_by_agent = {}
    for i in sorted(dec.v1):
        if neighbor_sets(g, i).negative_in:
            C_by_agent[i] = compute_Ci(g, i)
        else:
            notes.append(f"agent {i} is in V1 without negative in-edges and sets no bound on delta")

    anchored = True
    if not informed:
        C = 0.0
        anchored = False
        notes.append("no antagonistic edges: no informed agents, consensus to theta is not certified")
    elif not C_by_agent:
        raise EmptyV1WithAntagonism(
            "antagonistic edges are present but no V1 agent has negative in-edges to bound delta"
        )
    else:
        C = max(C_by_agent.values())

    if delta is None:
        delta = C + margin
    delta = float(delta)
    if delta <= C:
        notes.append(f"delta={delta:.4f} does not exceed C={C:.4f}")

    coupling = {}
    for i in sorted(informed):
        B = omega_sum(g, i)
        if i not in dec.v1 and classify_definiteness(B) is not Definiteness.POSITIVE_DEFINITE:
            notes.append(f"coupling of informed agent {i} is only positive semi-definite")
        B.setflags(write=False)
        coupling[i] = B

    k1 = 1.0 + 2.0 / delta
    LB = grounded_laplacian(g, delta, coupling)
    LB.setflags(write=False)
    return ProtocolDesign(
        n_agents=g.n_agents,
        dim=g.dim,
        theta=theta,
        delta=delta,
        k1=k1,
        x0=k1 * theta,
        informed_set=frozenset(informed),
        coupling=coupling,
        grounded_laplacian=LB,
        C=float(C),
        C_by_agent=C_by_agent,
        decomposition=dec,
        anchored=anchored,
        notes=tuple(notes),
    )


@dataclass
class CertificationReport:
    mode: Mode
    hurwitz: Optional[bool]
    lyapunov_P: Optional[np.ndarray]
    lyapunov_residual: Optional[float]
    sym_pd: bool
    stationarity_residual: float
    stationarity_ok: bool
    delta_exceeds_C: bool
    anchored: bool
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        if not (self.stationarity_ok and self.anchored):
            return False
        if self.mode is Mode.FIXED:
            return bool(self.hurwitz)
        return self.sym_pd

    def as_dict(self):
        return {
            "mode": self.mode.value,
            "hurwitz": self.hurwitz,
            "lyapunov_residual": self.lyapunov_residual,
            "sym_pd": self.sym_pd,
            "stationarity_residual": self.stationarity_residual,
            "stationarity_ok": self.stationarity_ok,
            "delta_exceeds_C": self.delta_exceeds_C,
            "anchored": self.anchored,
            "passed": self.passed,
            "notes": list(self.notes),
        }


def certify_design(design, mode=Mode.FIXED):
    """Check stability of the grounded error dynamics and the equilibrium identity.

    Fixed topologies need ``-L_B`` Hurwitz; switching topologies need
    ``L_B + L_B^T`` positive definite.  Both are evaluated regardless of
    ``mode``; only the verdict depends on it.
    """
    mode = Mode(mode)
    LB = design.grounded_laplacian
    notes = list(design.notes)
    try:
        cert = is_hurwitz(-LB)
        hurwitz, P, res = cert.hurwitz, cert.P, cert.residual
    except HurwitzInconclusive as exc:
        hurwitz, P, res = None, None, None
        notes.append(f"Hurwitz test inconclusive: {exc}")
    residual = design.stationarity_residual()
    return CertificationReport(
        mode=mode,
        hurwitz=hurwitz,
        lyapunov_P=P,
        lyapunov_residual=res,
        sym_pd=is_positive_definite(LB + LB.T),
        stationarity_residual=residual,
        stationarity_ok=residual <= design.stationarity_tolerance(),
        delta_exceeds_C=design.delta_exceeds_C,
        anchored=design.anchored,
        notes=notes,
    )
