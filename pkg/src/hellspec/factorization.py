"""Spectral factorization on the unit circle.

Exact integrals of rational spectra via Lyapunov equations, causal parts,
minimum-phase factors from an algebraic Riccati equation, conversion
between right (Phi = H*H) and left (Phi = WW*) factors, and the Riccati
factorization of Q_Lam = I + G* Lam G.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    NoStabilizingSolution,
    NotCoercive,
    NotInDomain,
    NotPSD,
    SingularObservabilityGramian,
)
from .linalg import (
    hermitian_sqrt,
    hermitize,
    min_eigenvalue,
    require_stable,
    solve_dare_stabilizing,
    solve_discrete_lyapunov,
)
from .realization import (
    Realization,
    constant,
    invert_realization,
    minimal,
    series,
    transpose_realization,
)


@dataclass(frozen=True)
class SpectralFactor:
    """A realization tagged with its factorization side.

    left:  Phi = W W*          right:  Phi = H* H
    """

    realization: Realization
    side: str

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")


@dataclass(frozen=True)
class CausalPart:
    """Z(z) analytic outside the disk with Phi = Z + Z*."""

    realization: Realization


@dataclass(frozen=True)
class QFactorization:
    """Minimum-phase co-analytic factor of Q_Lam = I + G* Lam G.

    Delta*(z) Delta(z) = Q_Lam(z) on the circle, DeltaInv realizes
    Delta^{-1}, and closed_loop = A - B (B*PB + I)^{-1} B*PA is stable.
    """

    P: np.ndarray
    delta: Realization
    delta_inv: Realization
    closed_loop: np.ndarray


def _realization_of(F):
    return F.realization if hasattr(F, "realization") else F


def lyapunov_integral(W):
    """Exact integral of W W* over the circle: C Pi C* + D D*."""
    W = _realization_of(W)
    require_stable(W.A)
    Pi = solve_discrete_lyapunov(W.A, W.B @ W.B.conj().T)
    return hermitize(W.C @ Pi @ W.C.conj().T + W.D @ W.D.conj().T)


def causal_part(W):
    """Causal part Z of the spectrum W W*, so that Z + Z* = W W*."""
    W = _realization_of(W)
    require_stable(W.A)
    Pi = solve_discrete_lyapunov(W.A, W.B @ W.B.conj().T)
    G = W.A @ Pi @ W.C.conj().T + W.B @ W.D.conj().T
    Sigma = hermitize(W.C @ Pi @ W.C.conj().T + W.D @ W.D.conj().T)
    return CausalPart(Realization(W.A, G, W.C, 0.5 * Sigma))


def causal_part_from_right(H):
    """Causal part Z of the spectrum H* H, so that Z + Z* = H* H.

    Mirror of `causal_part` on the adjoint side, using the observability
    Gramian S = A* S A + C* C instead of a factor conversion; exact and
    well conditioned regardless of how clustered the poles are.
    """
    H = _realization_of(H)
    require_stable(H.A)
    S = solve_discrete_lyapunov(H.A.conj().T, H.C.conj().T @ H.C)
    C_z = H.D.conj().T @ H.C + H.B.conj().T @ S @ H.A
    D_z = hermitize(H.D.conj().T @ H.D + H.B.conj().T @ S @ H.B)
    return CausalPart(Realization(H.A, H.B, C_z, 0.5 * D_z))


def sandwich_integral(outer, inner):
    """Exact integral of outer (inner* inner) outer* over the circle.

    Splitting inner* inner into causal + constant + anticausal parts with
    the observability Gramian of `inner` reduces the integral to two
    Lyapunov solves; no spectral factor is extracted, so the computation
    stays accurate for chains whose Gramians are nearly singular.
    """
    F = _realization_of(outer)
    H = _realization_of(inner)
    if F.n_inputs != H.n_inputs:
        raise DimensionMismatch("outer and inner must share the input space")
    require_stable(F.A)
    require_stable(H.A)
    S = solve_discrete_lyapunov(H.A.conj().T, H.C.conj().T @ H.C)
    X0 = hermitize(H.D.conj().T @ H.D + H.B.conj().T @ S @ H.B)
    X_plus = Realization(
        H.A, H.B, H.D.conj().T @ H.C + H.B.conj().T @ S @ H.A,
        np.zeros((H.n_inputs, H.n_inputs)),
    )
    Pi0 = solve_discrete_lyapunov(F.A, F.B @ X0 @ F.B.conj().T)
    base = F.C @ Pi0 @ F.C.conj().T + F.D @ X0 @ F.D.conj().T
    causal = series(F, X_plus)
    nc = causal.n_states
    A_joint = np.block(
        [
            [causal.A, np.zeros((nc, F.n_states))],
            [np.zeros((F.n_states, nc)), F.A],
        ]
    )
    B_joint = np.vstack([causal.B, F.B])
    Pi = solve_discrete_lyapunov(A_joint, B_joint @ B_joint.conj().T)
    T = causal.C @ Pi[:nc, nc:] @ F.C.conj().T
    return hermitize(base + T + T.conj().T)


def min_phase_factor(Z):
    """Minimum-phase left factor of the spectrum Z + Z*.

    Z is a causal part (A, G, C, Sigma/2).  The stabilizing solution P of

        P = A P A* + (G - A P C*) (Sigma - C P C*)^{-1} (G - A P C*)*

    gives D = (Sigma - C P C*)^{1/2}, B = (G - A P C*) D^{-1}; the factor
    W = (A, B, C, D) is stable with all zeros strictly inside the circle.
    """
    Z = _realization_of(Z) if not isinstance(Z, CausalPart) else Z.realization
    Z = minimal(Z)
    require_stable(Z.A)
    A, G, C = Z.A, Z.B, Z.C
    Sigma = hermitize(2.0 * Z.D)
    n = A.shape[0]
    if n == 0:
        return SpectralFactor(constant(hermitian_sqrt(Sigma)), "left")
    try:
        X = sla.solve_discrete_are(
            a=A.conj().T, b=C.conj().T, q=np.zeros((n, n)), r=Sigma, s=G
        )
    except (np.linalg.LinAlgError, ValueError) as err:
        raise NoStabilizingSolution(f"minimum-phase Riccati failed: {err}") from err
    P = hermitize(-X)
    DD = hermitize(Sigma - C @ P @ C.conj().T)
    if min_eigenvalue(DD) <= 1e-12 * max(1.0, np.linalg.norm(DD, 2)):
        raise NotCoercive("Sigma - C P C* is not positive definite")
    D = hermitian_sqrt(DD)
    B = np.linalg.solve(D.conj().T, (G - A @ P @ C.conj().T).conj().T).conj().T
    return SpectralFactor(Realization(A, B, C, D), "left")


def right_to_left(H):
    """Left factor H1 (H1 H1* = H* H) from a right factor H.

    Needs a minimal realization: callers reduce first.  P solves
    P = A* P A + C* C; [K; J] is an orthonormal basis of
    ker [A* P^{1/2}  C*]; with Gm = P^{-1/2} K,

        H1(z) = (D*C + B*PA)(zI - A)^{-1} Gm + B*P Gm + D*J.
    """
    H = _realization_of(H)
    require_stable(H.A)
    A, B, C, D = H.A, H.B, H.C, H.D
    n, q = A.shape[0], C.shape[0]
    if n == 0:
        return SpectralFactor(constant(D.conj().T), "left")
    P = solve_discrete_lyapunov(A.conj().T, C.conj().T @ C)
    w, V = np.linalg.eigh(P)
    if w[-1] <= 0.0:
        raise SingularObservabilityGramian("nothing is observable")
    # eigenvalues at the Lyapunov-solve noise level carry no directional
    # information; flooring them keeps the kernel formula finite without
    # changing the factor beyond roundoff
    w = np.maximum(w, n * np.finfo(float).eps * w[-1])
    P_half = (V * np.sqrt(w)) @ V.conj().T
    P_ihalf = (V / np.sqrt(w)) @ V.conj().T
    M = np.hstack([A.conj().T @ P_half, C.conj().T])
    _, s, Vh = np.linalg.svd(M)
    rank_tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > rank_tol))
    kernel = Vh[rank:].conj().T  # (n+q) x (n+q-rank), orthonormal columns
    if kernel.shape[1] != q:
        raise SingularObservabilityGramian(
            f"kernel dimension {kernel.shape[1]} != {q}; realization not minimal"
        )
    K, J = kernel[:n], kernel[n:]
    Gm = P_ihalf @ K
    C1 = D.conj().T @ C + B.conj().T @ P @ A
    D1 = B.conj().T @ P @ Gm + D.conj().T @ J
    return SpectralFactor(Realization(A, Gm, C1, D1), "left")


def left_to_right(W):
    """Right factor W1 (W1* W1 = W W*) from a left factor W.

    Transposition trick: in the variable zeta = 1/z the transposed system
    is a right factor, convert it with right_to_left, transpose back.
    """
    from .realization import balanced_minimal

    W = _realization_of(W)
    H1 = right_to_left(balanced_minimal(minimal(transpose_realization(W))))
    return SpectralFactor(transpose_realization(H1.realization), "right")


def factorize_Q(G, Lam):
    """Riccati factorization Q_Lam = Delta* Delta for G(z) = (zI - A)^{-1} B.

    Raises NotInDomain when no stabilizing Riccati solution exists, the
    computational signal that I + G* Lam G loses positivity on the circle.
    """
    G = _realization_of(G)
    A, B = G.A, G.B
    n, m = B.shape
    Lam = hermitize(Lam)
    if Lam.shape != (n, n):
        raise DimensionMismatch(f"Lam shape {Lam.shape} != {(n, n)}")
    try:
        P = solve_dare_stabilizing(A, B, Lam)
    except (NoStabilizingSolution, NotPSD) as err:
        raise NotInDomain(f"Q_Lam admits no spectral factorization: {err}") from err
    BPB = hermitize(B.conj().T @ P @ B + np.eye(m))
    N = hermitian_sqrt(BPB)
    M_mat = np.linalg.solve(N, B.conj().T @ P @ A)
    delta = Realization(A, B, M_mat, N)
    delta_inv = invert_realization(delta)
    closed_loop = A - B @ np.linalg.solve(BPB, B.conj().T @ P @ A)
    return QFactorization(P=P, delta=delta, delta_inv=delta_inv, closed_loop=closed_loop)
