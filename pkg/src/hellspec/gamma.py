"""The moment operator Gamma(Phi) = integral of G Phi G* and its range.

Range Gamma is a real vector space of Hermitian matrices generated, via a
discrete Lyapunov equation, by a base of C^{m x n}.  It carries feasibility
tests, orthogonal projection, and the covariance normalization that reduces
the constraint to the identity matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotPD
from .factorization import lyapunov_integral
from .linalg import (
    as_matrix,
    hermitian_inv_sqrt,
    hermitian_sqrt,
    hermitian_to_real_vector,
    hermitize,
    min_eigenvalue,
    require_stable,
)
from .realization import Realization, minimal, series

GRAM_SCHMIDT_DROP_TOL = 1e-10
FEASIBILITY_TOL = 1e-8


@dataclass(frozen=True)
class FilterBank:
    """Bank of first-order filters G(z) = (zI - A)^{-1} B.

    A is stable, B has full column rank and (A, B) is reachable; these are
    checked on construction.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A)
        B = as_matrix(self.B)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n:
            raise DimensionMismatch("A must be square and share states with B")
        require_stable(A)
        if np.linalg.matrix_rank(B) < B.shape[1]:
            raise DimensionMismatch("B does not have full column rank")
        # PBH test; the raw reachability-matrix rank is numerically useless
        # for clustered poles
        scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2), 1e-300)
        for lam in np.linalg.eigvals(A) if n else []:
            pbh = np.hstack([lam * np.eye(n) - A, B])
            if np.linalg.svd(pbh, compute_uv=False)[-1] <= 1e-9 * scale:
                raise DimensionMismatch(f"(A, B) is not reachable at eigenvalue {lam:.4g}")
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def realization(self):
        return Realization(self.A, self.B, np.eye(self.n), np.zeros((self.n, self.m)))


@dataclass(frozen=True)
class GammaBasis:
    """Generators of Range Gamma and an orthonormal spanning subset.

    generators[k] solves S - A S A* = B H_k + H_k* B* for the stored
    h_mats[k]; orthonormal spans the same space under <A, B> = Re tr(A B*).
    """

    generators: list
    h_mats: list
    orthonormal: list
    dimension: int
    n: int
    # smallest eigenvalue over the orthonormal elements; the Hessian shift
    # trick needs it once per basis
    min_generator_eig: float
    _stack: np.ndarray = field(repr=False, default=None)

    def coords(self, M):
        """Coordinates of the orthogonal projection of M onto Range Gamma."""
        M = hermitize(M)
        if M.shape != (self.n, self.n):
            raise DimensionMismatch(f"matrix shape {M.shape} != {(self.n, self.n)}")
        return self._stack @ hermitian_to_real_vector(M)

    def combine(self, coords):
        """Hermitian matrix with the given coordinates over `orthonormal`."""
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (self.dimension,):
            raise DimensionMismatch(f"expected {self.dimension} coordinates")
        M = np.zeros((self.n, self.n), dtype=complex)
        for c, U in zip(coords, self.orthonormal):
            M += c * U
        return hermitize(M)


def _canonical_h_base(m, n):
    """Real base of C^{m x n}: unit matrices and their j-multiples."""
    base = []
    for p in range(m):
        for q in range(n):
            E = np.zeros((m, n), dtype=complex)
            E[p, q] = 1.0
            base.append(E)
            base.append(1j * E)
    return base


def build_gamma_basis(G, h_base=None, drop_tol=GRAM_SCHMIDT_DROP_TOL):
    """Generators of Range Gamma from a base of C^{m x n}.

    Each H gives the solution of S - A S A* = B H + H* B*.  Dependent
    generators (they are not necessarily independent) are pruned by
    modified Gram-Schmidt with the given drop tolerance; H with
    B H + H* B* = 0 produce S = 0 and drop out the same way.
    """
    from .linalg import solve_discrete_lyapunov

    A, B = G.A, G.B
    n = G.n
    if h_base is None:
        h_base = _canonical_h_base(G.m, n)
    generators = []
    h_mats = []
    for H in h_base:
        rhs = hermitize(B @ H + H.conj().T @ B.conj().T)
        generators.append(solve_discrete_lyapunov(A, rhs))
        h_mats.append(H)

    orthonormal = []
    vecs = []
    for S in generators:
        v = hermitian_to_real_vector(S)
        scale = np.linalg.norm(v)
        for _ in range(2):  # MGS with one reorthogonalization pass
            for u in vecs:
                v = v - (u @ v) * u
        if np.linalg.norm(v) <= drop_tol * max(1.0, scale):
            continue
        v = v / np.linalg.norm(v)
        vecs.append(v)
        U = (v[: n * n] + 1j * v[n * n :]).reshape(n, n)
        orthonormal.append(hermitize(U))
    stack = np.stack(vecs) if vecs else np.zeros((0, 2 * n * n))
    min_eig = min((min_eigenvalue(U) for U in orthonormal), default=0.0)
    return GammaBasis(
        generators=generators,
        h_mats=h_mats,
        orthonormal=orthonormal,
        dimension=len(orthonormal),
        n=n,
        min_generator_eig=min_eig,
        _stack=stack,
    )


def gamma_apply(G, W_phi):
    """Gamma(Phi) for Phi = W W* given by a stable left factor W."""
    W = W_phi.realization if hasattr(W_phi, "realization") else W_phi
    return lyapunov_integral(minimal(series(G.realization(), W)))


def project_onto_range(basis, M):
    """Orthogonal projection of M onto Range Gamma under Re tr(A B*)."""
    return basis.combine(basis.coords(M))


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    residual: float


def feasibility_check(basis, Sigma, tol=FEASIBILITY_TOL):
    """Is Sigma in Range Gamma, i.e. does the moment constraint admit a
    spectrum?  True iff the projection residual is below tol*(1+||Sigma||)."""
    Sigma = hermitize(Sigma)
    residual = float(
        np.linalg.norm(Sigma - project_onto_range(basis, Sigma), "fro")
    )
    feasible = residual <= tol * (1.0 + np.linalg.norm(Sigma, "fro"))
    return FeasibilityResult(feasible=feasible, residual=residual)


def normalize_to_identity(G, Sigma):
    """Change of state basis sending the constraint Sigma to the identity.

    Abar = Sigma^{-1/2} A Sigma^{1/2}, Bbar = Sigma^{-1/2} B, so that
    Gbar(z) = Sigma^{-1/2} G(z) pointwise.
    """
    Sigma = hermitize(Sigma)
    if min_eigenvalue(Sigma) <= 1e-10 * max(np.linalg.norm(Sigma, 2), 1e-300):
        raise NotPD("Sigma must be positive definite to normalize")
    S_half = hermitian_sqrt(Sigma)
    S_ihalf = hermitian_inv_sqrt(Sigma)
    return FilterBank(A=S_ihalf @ G.A @ S_half, B=S_ihalf @ G.B)
