"""State-space calculus for rational matrix functions on the unit circle.

A Realization (A, B, C, D) stands for F(z) = C (zI - A)^{-1} B + D.  All
factors produced by this package are analytic outside the unit circle
(A stable); realization inverses may be unstable and stability is asserted
separately where a caller requires it.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingularD, SingularResolvent
from .linalg import as_matrix, spectral_radius

RANK_TOL = 1e-9


def _readonly(M, dtype=complex):
    M = np.array(M, dtype=dtype)
    M.flags.writeable = False
    return M


@dataclass(frozen=True)
class Realization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _readonly(as_matrix(self.A))
        B = _readonly(as_matrix(self.B))
        C = _readonly(as_matrix(self.C))
        D = _readonly(as_matrix(self.D))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        if B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch("B/C state dimension differs from A")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch("D shape inconsistent with B and C")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def is_stable(self):
        return spectral_radius(self.A) < 1.0 - 1e-10


def constant(D):
    """Zero-state realization of a constant matrix function."""
    D = as_matrix(D)
    n_out, n_in = D.shape
    return Realization(
        np.zeros((0, 0)), np.zeros((0, n_in)), np.zeros((n_out, 0)), D
    )


def identity(m):
    return constant(np.eye(m))


def evaluate(R, theta):
    """F(e^{j theta}) = C (e^{j theta} I - A)^{-1} B + D."""
    z = np.exp(1j * float(theta))
    n = R.n_states
    if n == 0:
        return R.D.copy()
    try:
        X = np.linalg.solve(z * np.eye(n) - R.A, R.B)
    except np.linalg.LinAlgError as err:
        raise SingularResolvent(f"resolvent singular at theta={theta}") from err
    return R.C @ X + R.D


def sample_on_grid(R, thetas, chunk=256):
    """Evaluate on many angles at once; returns (len(thetas), q, p)."""
    thetas = np.asarray(thetas, dtype=float)
    n, q, p = R.n_states, R.n_outputs, R.n_inputs
    out = np.empty((thetas.size, q, p), dtype=complex)
    if n == 0:
        out[:] = R.D
        return out
    eye = np.eye(n)
    for lo in range(0, thetas.size, chunk):
        zs = np.exp(1j * thetas[lo : lo + chunk])
        M = zs[:, None, None] * eye - R.A
        try:
            X = np.linalg.solve(M, np.broadcast_to(R.B, (zs.size, n, p)))
        except np.linalg.LinAlgError as err:
            raise SingularResolvent("resolvent singular on grid") from err
        out[lo : lo + chunk] = R.C @ X + R.D
    return out


def series(F, G):
    """Realization of the product F(z) G(z) (input feeds G first)."""
    if F.n_inputs != G.n_outputs:
        raise DimensionMismatch(
            f"cannot compose {F.n_outputs}x{F.n_inputs} with {G.n_outputs}x{G.n_inputs}"
        )
    nf, ng = F.n_states, G.n_states
    A = np.block(
        [
            [F.A, F.B @ G.C],
            [np.zeros((ng, nf)), G.A],
        ]
    )
    B = np.vstack([F.B @ G.D, G.B])
    C = np.hstack([F.C, F.D @ G.C])
    D = F.D @ G.D
    return Realization(A, B, C, D)


def chain(*factors):
    R = factors[0]
    for F in factors[1:]:
        R = series(R, F)
    return R


def parallel(F, G):
    """Realization of the sum F(z) + G(z)."""
    if (F.n_outputs, F.n_inputs) != (G.n_outputs, G.n_inputs):
        raise DimensionMismatch("summands must have equal dimensions")
    nf, ng = F.n_states, G.n_states
    A = np.block(
        [
            [F.A, np.zeros((nf, ng))],
            [np.zeros((ng, nf)), G.A],
        ]
    )
    B = np.vstack([F.B, G.B])
    C = np.hstack([F.C, G.C])
    return Realization(A, B, C, F.D + G.D)


def transpose_realization(R):
    """Realization of F^T(z): (A^T, C^T, B^T, D^T), no conjugation."""
    return Realization(R.A.T, R.C.T, R.B.T, R.D.T)


def invert_realization(F):
    """Realization of F^{-1}(z) for square F with invertible D.

    Returns (A - B D^{-1} C, B D^{-1}, -D^{-1} C, D^{-1}).  The result need
    not be stable; callers assert stability where they rely on it.
    """
    if F.n_outputs != F.n_inputs:
        raise DimensionMismatch("only square functions can be inverted")
    D = F.D
    if D.shape[0] == 0 or np.linalg.cond(D) > 1e12:
        raise SingularD("feedthrough matrix is singular or too ill-conditioned")
    Dinv = np.linalg.inv(D)
    BDinv = F.B @ Dinv
    return Realization(F.A - BDinv @ F.C, BDinv, -Dinv @ F.C, Dinv)


def _range_basis(mats, tol_abs):
    """Orthonormal basis of the column span of a list of matrices."""
    M = np.hstack(mats)
    if M.shape[1] == 0:
        return M
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, s > tol_abs]


def _controllable_subspace(A, B, tol):
    """Orthonormal basis of the smallest A-invariant subspace holding range B."""
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2) if B.size else 0.0, 1e-300)
    tol_abs = tol * scale
    V = _range_basis([B], tol_abs)
    frontier = V
    while V.shape[1] < n and frontier.shape[1] > 0:
        W = A @ frontier
        # two projection passes keep the basis orthonormal
        W = W - V @ (V.conj().T @ W)
        W = W - V @ (V.conj().T @ W)
        fresh = _range_basis([W], tol_abs)
        if fresh.shape[1] == 0:
            break
        V = np.hstack([V, fresh])
        frontier = fresh
    return V


def minimal(R, tol=RANK_TOL):
    """Exact minimality reduction by controllability/observability staircase.

    Rank decisions use tolerance tol relative to the operand norms; the
    compressed A keeps only eigenvalues of the original A, so stability is
    preserved.
    """
    V = _controllable_subspace(R.A, R.B, tol)
    A = V.conj().T @ R.A @ V
    B = V.conj().T @ R.B
    C = R.C @ V
    W = _controllable_subspace(A.conj().T, C.conj().T, tol)
    A = W.conj().T @ A @ W
    B = W.conj().T @ B
    C = C @ W
    return Realization(A, B, C, R.D)


def balanced_minimal(R, floor=1e-11):
    """Balanced coordinates, dropping states below the Hankel floor.

    Long factor chains carry genuine but numerically invisible modes whose
    observability Gramian conditions like the square of their Hankel value;
    balancing keeps the Gramian-based conversions well posed.  Truncation at
    the floor perturbs the transfer function by at most 2 * sum of dropped
    Hankel values, two orders below the grid tolerances asserted anywhere.
    """
    n = R.n_states
    if n == 0:
        return R
    from .linalg import solve_discrete_lyapunov

    Pc = solve_discrete_lyapunov(R.A, R.B @ R.B.conj().T)
    Po = solve_discrete_lyapunov(R.A.conj().T, R.C.conj().T @ R.C)

    def factor(P):
        w, V = np.linalg.eigh(P)
        return V * np.sqrt(np.clip(w, 0.0, None))

    Lc, Lo = factor(Pc), factor(Po)
    U, s, Vh = np.linalg.svd(Lo.conj().T @ Lc)
    if s.size == 0 or s[0] <= 0.0:
        return constant(R.D)
    keep = s > floor * s[0]
    if not np.any(keep):
        return constant(R.D)
    s_k = s[keep]
    T = (Lc @ Vh[keep].conj().T) / np.sqrt(s_k)
    T_inv = (U[:, keep].conj().T @ Lo.conj().T) / np.sqrt(s_k)[:, None]
    return Realization(T_inv @ R.A @ T, T_inv @ R.B, R.C @ T, R.D)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform angles on [-pi, pi); integration is the periodic trapezoid,
    i.e. the plain mean of the samples."""

    count: int
    thetas: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.count <= 0:
            raise DimensionMismatch("grid needs a positive point count")
        thetas = -np.pi + 2.0 * np.pi * np.arange(self.count) / self.count
        object.__setattr__(self, "thetas", _readonly(thetas, dtype=float))

    def integrate(self, samples):
        """Mean over the grid of per-angle samples (first axis)."""
        return np.mean(np.asarray(samples), axis=0)
