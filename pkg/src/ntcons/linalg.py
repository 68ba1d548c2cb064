"""Dense kernels for the small matrices that appear in protocol design.

Everything here works on plain ``numpy`` arrays.  Block Laplacians in this
package are at most a few dozen rows, so the routines favour transparency
over speed: the symmetric eigensolver is cyclic Jacobi, and the Lyapunov
equation is solved through its Kronecker (vectorised) form.
"""

import enum
import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import HurwitzInconclusive, InvalidInput, NotPositiveDefinite, Singular

REL_TOL = 1e-10
ABS_TOL = 1e-12
MAX_LYAPUNOV_DIM = 64


class Definiteness(enum.Enum):
    POSITIVE_DEFINITE = "PD"
    POSITIVE_SEMIDEFINITE = "PSD"
    ZERO = "ZERO"
    NEGATIVE_SEMIDEFINITE = "NSD"
    NEGATIVE_DEFINITE = "ND"
    INDEFINITE = "INDEFINITE"

    @property
    def sign(self):
        """Matrix sign in {-1, 0, +1}; ``None`` for indefinite matrices."""
        return _SIGNS[self]

    def mirror(self):
        return _MIRROR[self]


_SIGNS = {
    Definiteness.POSITIVE_DEFINITE: 1,
    Definiteness.POSITIVE_SEMIDEFINITE: 1,
    Definiteness.ZERO: 0,
    Definiteness.NEGATIVE_SEMIDEFINITE: -1,
    Definiteness.NEGATIVE_DEFINITE: -1,
    Definiteness.INDEFINITE: None,
}

_MIRROR = {
    Definiteness.POSITIVE_DEFINITE: Definiteness.NEGATIVE_DEFINITE,
    Definiteness.POSITIVE_SEMIDEFINITE: Definiteness.NEGATIVE_SEMIDEFINITE,
    Definiteness.ZERO: Definiteness.ZERO,
    Definiteness.NEGATIVE_SEMIDEFINITE: Definiteness.POSITIVE_SEMIDEFINITE,
    Definiteness.NEGATIVE_DEFINITE: Definiteness.POSITIVE_DEFINITE,
    Definiteness.INDEFINITE: Definiteness.INDEFINITE,
}


def as_square(A, name="matrix"):
    A = np.array(A, dtype=float, ndmin=2)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def symmetrize(Q):
    """Return ``(Q + Q.T) / 2`` as a new, exactly symmetric array."""
    Q = as_square(Q)
    S = 0.5 * (Q + Q.T)
    # force bit-exact symmetry regardless of rounding in the average
    iu = np.triu_indices_from(S, 1)
    S[(iu[1], iu[0])] = S[iu]
    return S


def is_symmetric(Q, rtol=0.0):
    Q = as_square(Q)
    scale = np.max(np.abs(Q)) if Q.size else 0.0
    return bool(np.max(np.abs(Q - Q.T), initial=0.0) <= rtol * scale)


def sym_eigen(Q, max_sweeps=60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    Q : array_like, shape (n, n)
        Symmetric input; only its symmetric part is used.
    max_sweeps : int
        Upper bound on full sweeps over the off-diagonal pairs.

    Returns
    -------
    w : ndarray, shape (n,)
        Eigenvalues in ascending order.
    V : ndarray, shape (n, n)
        Orthonormal eigenvectors, ``V[:, k]`` pairs with ``w[k]``.
    """
    A = symmetrize(Q)
    n = A.shape[0]
    V = np.eye(n)
    # work on a unit-scale copy so squared norms cannot overflow
    scale = float(np.max(np.abs(A), initial=0.0))
    if scale == 0.0:
        return np.zeros(n), V
    A /= scale
    off_mask = ~np.eye(n, dtype=bool)
    fro2 = float(np.sum(A * A))
    for _ in range(max_sweeps):
        off2 = float(np.sum(A[off_mask] ** 2))
        if off2 <= 1e-36 * fro2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                gap = A[q, q] - A[p, p]
                if abs(apq) <= 1e-18 * abs(gap):
                    # small-angle limit of the formula below; avoids overflow in tau**2
                    t = apq / gap
                else:
                    tau = gap / (2.0 * apq)
                    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A) * scale
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eigvalsh(Q):
    return sym_eigen(Q)[0]


def default_tol(eigenvalues, rel=REL_TOL, floor=ABS_TOL):
    scale = float(np.max(np.abs(eigenvalues), initial=0.0))
    return max(rel * scale, floor)


def classify_definiteness(Q, tol=None):
    """Sign class of a symmetric matrix from its extreme eigenvalues.

    ``tol`` defaults to ``1e-10`` times the largest absolute eigenvalue,
    with an absolute floor of ``1e-12``.
    """
    w = eigvalsh(Q)
    if tol is None:
        tol = default_tol(w)
    if w.size == 0:
        return Definiteness.ZERO
    lo, hi = w[0], w[-1]
    if abs(lo) <= tol and abs(hi) <= tol:
        return Definiteness.ZERO
    if lo > tol:
        return Definiteness.POSITIVE_DEFINITE
    if hi < -tol:
        return Definiteness.NEGATIVE_DEFINITE
    if lo >= -tol:
        return Definiteness.POSITIVE_SEMIDEFINITE
    if hi <= tol:
        return Definiteness.NEGATIVE_SEMIDEFINITE
    return Definiteness.INDEFINITE


def cholesky(Q):
    """Lower-triangular ``L`` with ``L @ L.T == Q``.

    Raises
    ------
    NotPositiveDefinite
        When a pivot is not strictly positive.
    """
    A = symmetrize(Q)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        row = L[j, :j]
        pivot = A[j, j] - row @ row
        if not pivot > 0.0:
            raise NotPositiveDefinite(f"pivot {j} is {pivot:.3e}")
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ row) / L[j, j]
    return L


def is_positive_definite(Q):
    try:
        cholesky(Q)
    except NotPositiveDefinite:
        return False
    return True


def solve_linear(A, b):
    """Solve ``A x = b`` by pivoted LU; raises ``Singular`` on a tiny pivot."""
    A = as_square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise InvalidInput(f"rhs has {b.shape[0]} rows, matrix has {A.shape[0]}")
    scale = float(np.max(np.abs(A), initial=0.0))
    if scale == 0.0:
        raise Singular("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    if np.min(np.abs(np.diag(lu))) <= 1e-12 * scale:
        raise Singular("pivot below 1e-12 relative to the largest entry")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def solve_lyapunov(A, Q):
    """Solve ``A.T @ P + P @ A = -Q`` for symmetric ``P``.

    The equation is rewritten as ``(A.T kron I + I kron A.T) vec(P) = -vec(Q)``
    in row-major vectorisation and solved densely, so ``n`` is capped at 64.
    """
    A = as_square(A, "A")
    Q = symmetrize(Q)
    n = A.shape[0]
    if Q.shape != A.shape:
        raise InvalidInput(f"Q shape {Q.shape} does not match A shape {A.shape}")
    if n > MAX_LYAPUNOV_DIM:
        raise InvalidInput(f"dimension {n} exceeds {MAX_LYAPUNOV_DIM}")
    eye = np.eye(n)
    K = np.kron(A.T, eye) + np.kron(eye, A.T)
    try:
        p = solve_linear(K, -Q.reshape(-1))
    except Singular as exc:
        raise HurwitzInconclusive(
            "Lyapunov operator is singular (eigenvalues symmetric about the imaginary axis)"
        ) from exc
    return symmetrize(p.reshape(n, n))


def lyapunov_residual(A, P, Q):
    A = np.asarray(A, dtype=float)
    return float(np.linalg.norm(A.T @ P + P @ A + Q))


class HurwitzCertificate(NamedTuple):
    hurwitz: bool
    P: np.ndarray
    residual: float


def is_hurwitz(A):
    """Certify that every eigenvalue of ``A`` has negative real part.

    A symmetric positive definite solution of ``A.T P + P A = -I`` exists
    exactly when ``A`` is Hurwitz, so the test is one Lyapunov solve
    followed by a Cholesky attempt.  Raises ``HurwitzInconclusive`` when
    the Lyapunov operator is singular.
    """
    A = as_square(A, "A")
    eye = np.eye(A.shape[0])
    P = solve_lyapunov(A, eye)
    return HurwitzCertificate(is_positive_definite(P), P, lyapunov_residual(A, P, eye))
