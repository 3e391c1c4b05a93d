"""Dense complex-matrix substrate.

Hermitian algebra, the discrete Lyapunov and Riccati solvers, Hermitian
square roots and least squares over the real vector space of Hermitian
matrices with inner product <A, B> = Re tr(A B*).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    EmptyBasis,
    NoStabilizingSolution,
    NotPSD,
    NotStable,
)

STABILITY_MARGIN = 1e-10
RICCATI_RESIDUAL_TOL = 1e-9


def as_matrix(M):
    """Coerce to a 2-d complex128 array."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {M.shape}")
    return M


def hermitize(M):
    """(M + M*)/2; applied after every solver to kill rounding drift."""
    M = as_matrix(M)
    return (M + M.conj().T) / 2.0


def herm_inner(X, Y):
    """Real inner product Re tr(X Y*) on Hermitian matrices."""
    return float(np.real(np.sum(X * Y.conj())))


def spectral_radius(A):
    A = as_matrix(A)
    if A.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def min_eigenvalue(M):
    """Smallest real eigenvalue of a Hermitian matrix."""
    M = hermitize(M)
    if M.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(M)[0])


def require_stable(A, margin=STABILITY_MARGIN):
    rho = spectral_radius(A)
    if rho >= 1.0 - margin:
        raise NotStable(f"spectral radius {rho:.6g} >= {1.0 - margin}")
    return A


def _require_square_same(A, Q):
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch("A must be square")
    if Q.shape != A.shape:
        raise DimensionMismatch(f"shapes {A.shape} and {Q.shape} differ")


def solve_discrete_lyapunov(A, Q):
    """Unique solution of Pi = A Pi A* + Q for A with spectral radius < 1.

    Q is Hermitian; the result is symmetrized.  Positive semidefinite Q
    gives positive semidefinite Pi.
    """
    A = as_matrix(A)
    Q = hermitize(Q)
    _require_square_same(A, Q)
    require_stable(A)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    Pi = sla.solve_discrete_lyapunov(A, Q)
    return hermitize(Pi)


def solve_discrete_sylvester(A, B, Q):
    """Unique solution of X = A X B + Q for stable A and B.

    Solved through the Kronecker form; the operands here are small cross
    Gramians, never the large chained systems.
    """
    A = as_matrix(A)
    B = as_matrix(B)
    Q = as_matrix(Q)
    p, q = Q.shape
    if A.shape != (p, p) or B.shape != (q, q):
        raise DimensionMismatch("Sylvester operand shapes are inconsistent")
    if p == 0 or q == 0:
        return np.zeros((p, q), dtype=complex)
    K = np.eye(p * q) - np.kron(B.T, A)
    x = np.linalg.solve(K, Q.flatten(order="F"))
    return x.reshape((p, q), order="F")


def _riccati_map(A, B, Lam, P):
    BPB = B.conj().T @ P @ B + np.eye(B.shape[1])
    APB = A.conj().T @ P @ B
    return hermitize(A.conj().T @ P @ A - APB @ np.linalg.solve(BPB, APB.conj().T) + Lam)


def _dare_fixed_point(A, B, Lam, damping=0.5, max_iters=500, tol=1e-14):
    P = hermitize(Lam)
    bound = 1e8 * (1.0 + np.linalg.norm(Lam, "fro"))
    for _ in range(max_iters):
        try:
            P_next = (1.0 - damping) * P + damping * _riccati_map(A, B, Lam, P)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(P_next)) or np.linalg.norm(P_next, "fro") > bound:
            return None
        if np.linalg.norm(P_next - P, "fro") <= tol * (1.0 + np.linalg.norm(P, "fro")):
            return P_next
        P = P_next
    return None


def solve_dare_stabilizing(A, B, Lam):
    """Stabilizing solution of P = A*PA - A*PB (B*PB + I)^{-1} B*PA + Lam.

    On success the closed loop A - B (B*PB + I)^{-1} B*PA has spectral
    radius < 1 and B*PB + I is positive definite, so the returned P also
    factorizes I + G* Lam G on the unit circle.  Raises
    NoStabilizingSolution otherwise; that failure is the computational
    signal that Lam leaves the feasible set.
    """
    A = as_matrix(A)
    B = as_matrix(B)
    Lam = hermitize(Lam)
    n, m = B.shape
    if A.shape != (n, n) or Lam.shape != (n, n):
        raise DimensionMismatch("A, B, Lam dimensions are inconsistent")
    require_stable(A)
    if np.linalg.norm(Lam, "fro") == 0.0:
        return np.zeros((n, n), dtype=complex)

    P = None
    try:
        P = hermitize(sla.solve_discrete_are(A, B, Lam, np.eye(m)))
    except (np.linalg.LinAlgError, ValueError):
        P = None
    if P is None or not np.all(np.isfinite(P)):
        # structured-pencil route failed; damped iteration of the Riccati map
        P = _dare_fixed_point(A, B, Lam)
    if P is None:
        raise NoStabilizingSolution("Riccati decomposition and iteration both failed")

    # The stabilizing property, not the method, is the contract: verify it.
    BPB = hermitize(B.conj().T @ P @ B + np.eye(m))
    if min_eigenvalue(BPB) <= 1e-12 * max(1.0, np.linalg.norm(BPB, 2)):
        raise NoStabilizingSolution("B*PB + I is not positive definite")
    gain = np.linalg.solve(BPB, B.conj().T @ P @ A)
    closed_loop = A - B @ gain
    if spectral_radius(closed_loop) >= 1.0:
        raise NoStabilizingSolution("closed loop is not stable")
    residual = np.linalg.norm(_riccati_map(A, B, Lam, P) - P, "fro")
    if residual > RICCATI_RESIDUAL_TOL * max(1.0, np.linalg.norm(P, "fro")):
        raise NoStabilizingSolution(f"Riccati residual {residual:.3g} too large")
    return P


def hermitian_sqrt(M):
    """Hermitian PSD square root S with S @ S = M.

    Eigenvalues in [-1e-8 * ||M||, 0) are clipped to zero; anything more
    negative raises NotPSD.
    """
    M = hermitize(M)
    n = M.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    w, V = np.linalg.eigh(M)
    scale = max(abs(w[0]), abs(w[-1]))
    if w[0] < -1e-8 * scale:
        raise NotPSD(f"min eigenvalue {w[0]:.3g} < -1e-8 * {scale:.3g}")
    w = np.clip(w, 0.0, None)
    return hermitize((V * np.sqrt(w)) @ V.conj().T)


def hermitian_inv_sqrt(M, rel_tol=1e-10):
    """Inverse Hermitian square root of a positive definite matrix."""
    from .errors import NotPD

    M = hermitize(M)
    w, V = np.linalg.eigh(M)
    if w[0] <= rel_tol * max(1e-300, abs(w[-1])):
        raise NotPD(f"min eigenvalue {w[0]:.3g} not positive definite")
    return hermitize((V / np.sqrt(w)) @ V.conj().T)


def hermitian_to_real_vector(M):
    """Isometric embedding of (H(n), Re tr(A B*)) into R^(2 n^2)."""
    v = np.asarray(M, dtype=complex).reshape(-1)
    return np.concatenate([v.real, v.imag])


def real_vector_to_hermitian(v, n):
    half = n * n
    M = (v[:half] + 1j * v[half:]).reshape(n, n)
    return hermitize(M)


@dataclass
class LeastSquaresSolution:
    """Real coefficients fitting a Hermitian target over Hermitian columns."""

    coefficients: np.ndarray
    residual_norm: float
    rank: int


def least_squares(columns, target):
    """Minimize ||sum_k alpha_k columns[k] - target||_F over real alpha.

    Columns live in the real vector space of Hermitian matrices; rank
    deficient systems resolve to the minimum-norm solution.
    """
    if len(columns) == 0:
        raise EmptyBasis("no columns given")
    target = hermitize(target)
    n = target.shape[0]
    cols = []
    for M in columns:
        M = hermitize(M)
        if M.shape != (n, n):
            raise DimensionMismatch(f"column shape {M.shape} != {(n, n)}")
        cols.append(hermitian_to_real_vector(M))
    A_mat = np.stack(cols, axis=1)
    b = hermitian_to_real_vector(target)
    coeffs, _, rank, _ = np.linalg.lstsq(A_mat, b, rcond=None)
    residual = float(np.linalg.norm(A_mat @ coeffs - b))
    return LeastSquaresSolution(coefficients=coeffs, residual_norm=residual, rank=int(rank))
