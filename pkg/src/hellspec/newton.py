"""Globally convergent matricial Newton solver for the dual functional

    J(Lam) = tr int Q_Lam^{-1} Psi + tr Lam,    Q_Lam = I + G* Lam G,

minimized over multipliers Lam in Range Gamma keeping Q_Lam positive on the
circle.  All integrals are exact: every step reduces to Lyapunov and Riccati
solves through factor chains, never to numerical quadrature.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateHessian,
    MaxIterations,
    NotCoercive,
    NotInDomain,
    StepTooSmall,
)
from .factorization import (
    CausalPart,
    SpectralFactor,
    causal_part_from_right,
    factorize_Q,
    left_to_right,
    lyapunov_integral,
    min_phase_factor,
    right_to_left,
    sandwich_integral,
)
from .linalg import hermitian_sqrt, hermitize
from .realization import (
    balanced_minimal,
    chain,
    constant,
    minimal,
    parallel,
    sample_on_grid,
    series,
)


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.25          # Armijo fraction, must lie in (0, 1/2)
    grad_tol: float = 1e-9
    max_iters: int = 200
    t_min: float = 2.0 ** -40
    grid_check: int = 2048

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must be in (0, 1/2), got {self.alpha}")


@dataclass(frozen=True)
class Prior:
    """A coercive prior spectrum Psi held through both of its factors.

    w_psi is a stable left factor (Psi = W W*); h_psi the right factor
    (Psi = H* H) computed once, since every evaluation of the functional
    starts from H_Psi.
    """

    w_psi: SpectralFactor
    h_psi: SpectralFactor

    @classmethod
    def from_left_factor(cls, W, coercivity_grid=512):
        W = W.realization if hasattr(W, "realization") else W
        if W.n_outputs != W.n_inputs:
            raise NotCoercive("prior factor must be square")
        thetas = -np.pi + 2 * np.pi * np.arange(coercivity_grid) / coercivity_grid
        samples = sample_on_grid(W, thetas)
        psi = samples @ samples.conj().transpose(0, 2, 1)
        eigs = np.linalg.eigvalsh(psi)
        if eigs.min() <= 1e-12 * max(eigs.max(), 1e-300):
            raise NotCoercive("prior spectrum is not coercive on the circle")
        return cls(
            w_psi=SpectralFactor(W, "left"),
            h_psi=left_to_right(minimal(W)),
        )

    @property
    def m(self):
        return self.w_psi.realization.n_outputs


@dataclass(frozen=True)
class LambdaPoint:
    """A multiplier inside the feasible set, with its Q factorization."""

    coords: np.ndarray
    matrix: np.ndarray
    qfact: object


def lambda_point(basis, G, coords):
    """Build a LambdaPoint; raises NotInDomain outside the feasible set."""
    coords = np.asarray(coords, dtype=float)
    matrix = basis.combine(coords)
    qfact = factorize_Q(G.realization(), matrix)
    return LambdaPoint(coords=coords, matrix=matrix, qfact=qfact)


@dataclass
class TraceRecord:
    iteration: int
    J: float
    grad_norm: float
    constraint_residual: float
    t: float
    backtracks: int
    # exactly computed J(next) - J(this); strictly negative for every
    # accepted step even when the decrease is below one ulp of J itself
    decrease: float = 0.0


@dataclass
class SolverTrace:
    """One record per Newton step plus the converged point.

    Each step record carries the functional value and gradient norm at the
    iterate the step left from, and the accepted step length.
    """

    steps: list = field(default_factory=list)
    final: TraceRecord = None

    def all_records(self):
        records = list(self.steps)
        if self.final is not None:
            records.append(self.final)
        return records

    def values(self):
        return [r.J for r in self.all_records()]


@dataclass
class SolverResult:
    lambda_star: LambdaPoint
    trace: SolverTrace
    iterations: int
    value: float
    grad_norm: float
    constraint_residual: float


class PointWorkspace:
    """Factor chains shared by value, gradient and Hessian at one multiplier.

    Chains follow the reduction of both Newton integrals to exact Lyapunov
    integrals of the form int (G Delta^{-1} W)(...)*, with the product
    spectra squared through causal parts and minimum-phase factors.
    """

    def __init__(self, basis, G, prior, point):
        self.basis = basis
        self.G = G
        self.prior = prior
        self.point = point

    @cached_property
    def h_psi_dinv(self):
        # right factor of Phi_Psi = Delta^{-*} Psi Delta^{-1}
        return balanced_minimal(
            minimal(series(self.prior.h_psi.realization, self.point.qfact.delta_inv))
        )

    @cached_property
    def g_dinv(self):
        return balanced_minimal(minimal(series(self.G.realization(), self.point.qfact.delta_inv)))

    @cached_property
    def value(self):
        J = np.trace(lyapunov_integral(self.h_psi_dinv)).real
        return float(J + np.trace(self.point.matrix).real)

    @cached_property
    def w1(self):
        # left factor of Phi_Psi, needed where a factor is structural:
        # the squared-spectrum term and the optimal-spectrum assembly
        return balanced_minimal(right_to_left(self.h_psi_dinv).realization)

    @cached_property
    def z1(self):
        return causal_part_from_right(self.h_psi_dinv).realization

    @cached_property
    def gradient_matrix(self):
        # int G Q^{-1} Psi Q^{-1} G* evaluated without factor extraction;
        # identical to the W_1 route in exact arithmetic but immune to the
        # Gramian collapse of clustered-pole chains
        integral = sandwich_integral(self.g_dinv, self.h_psi_dinv)
        return hermitize(np.eye(self.basis.n) - integral)

    @cached_property
    def gradient(self):
        return self.basis.coords(self.gradient_matrix)

    @cached_property
    def constraint_residual(self):
        return float(np.linalg.norm(self.gradient_matrix, "fro"))

    @cached_property
    def _phi_psi_squared(self):
        # int G D^-1 Phi_Psi^2 D^-* G* = int (G D^-1 W_1)(W_1* W_1)(G D^-1 W_1)*
        return sandwich_integral(series(self.g_dinv, self.w1), self.w1)

    def _cross(self, S):
        """int G D^-1 [Phi_S Phi_Psi + Phi_Psi Phi_S] D^-* G* for S > 0,
        by the three-term polarization (S + Psi)^2 - S^2 - Psi^2."""
        # S^{1/2} is nonsingular and g_dinv minimal, so the product stays minimal
        h_s = series(constant(hermitian_sqrt(S)), self.g_dinv)
        w_s = balanced_minimal(right_to_left(h_s).realization)  # left factor of Phi_S
        square_s = sandwich_integral(series(self.g_dinv, w_s), w_s)
        z_sum = parallel(causal_part_from_right(h_s).realization, self.z1)
        w_sum = balanced_minimal(min_phase_factor(CausalPart(z_sum)).realization)
        square_sum = sandwich_integral(series(self.g_dinv, w_sum), w_sum)
        return square_sum - square_s - self._phi_psi_squared

    @cached_property
    def _cross_identity(self):
        # the identity-matrix cross term appears in the shift of every
        # indefinite basis element; computed once per Newton step
        return self._cross(np.eye(self.basis.n))

    def hessian(self):
        basis = self.basis
        eye = np.eye(basis.n)
        shift = 1.0 + max(0.0, -basis.min_generator_eig)
        H = np.empty((basis.dimension, basis.dimension))
        for k, U in enumerate(basis.orthonormal):
            Y_k = self._cross(U + shift * eye) - shift * self._cross_identity
            H[k] = basis.coords(Y_k)
        return (H + H.T) / 2.0


def eval_J(prior, point):
    """J(Lam) = tr int (H_Psi Delta^{-1})(H_Psi Delta^{-1})* + tr Lam."""
    hd = minimal(series(prior.h_psi.realization, point.qfact.delta_inv))
    J = np.trace(lyapunov_integral(hd)).real + np.trace(point.matrix).real
    return float(J)


def _trace_integral_sandwich(F1, F2, M, F3, F4):
    """tr int F1 F2* M F3 F4* over the circle, exactly.

    The four factors are stable; splitting the mixed products into causal,
    constant and anticausal parts leaves three surviving pairings, each a
    discrete Sylvester solve.  M enters every term linearly, so when M is
    small the result has absolute accuracy eps * O(||M||), far below one
    ulp of the functional itself.
    """
    from .linalg import solve_discrete_sylvester

    A1, B1, C1, D1 = F1.A, F1.B, F1.C, F1.D
    A2, B2, C2, D2 = F2.A, F2.B, F2.C, F2.D
    A3, B3, C3, D3 = F3.A, F3.B, F3.C, F3.D
    A4, B4, C4, D4 = F4.A, F4.B, F4.C, F4.D
    S23 = solve_discrete_sylvester(A2.conj().T, A3, C2.conj().T @ M @ C3)
    S41 = solve_discrete_sylvester(A4.conj().T, A1, C4.conj().T @ C1)
    L = D2.conj().T @ M @ D3 + B2.conj().T @ S23 @ B3
    K = D4.conj().T @ D1 + B4.conj().T @ S41 @ B1
    C_z = D2.conj().T @ M @ C3 + B2.conj().T @ S23 @ A3
    C_y = C4.conj().T @ D1 + A4.conj().T @ S41 @ B1
    C_w = C2.conj().T @ M @ D3 + A2.conj().T @ S23 @ B3
    C_u = D4.conj().T @ C1 + B4.conj().T @ S41 @ A1
    T34 = solve_discrete_sylvester(A3, A4.conj().T, B3 @ B4.conj().T)
    T12 = solve_discrete_sylvester(A1, A2.conj().T, B1 @ B2.conj().T)
    total = np.trace(L @ K) + np.trace(C_z @ T34 @ C_y) + np.trace(C_w @ C_u @ T12)
    return complex(total)


def exact_decrease(G, prior, point, trial, step_matrix, t):
    """J(Lam + t step) - J(Lam) without cancellation.

    Since Q_t - Q_0 = t G* S G exactly (S the step matrix),

        dJ(t) = t [ tr S - tr int Q_t^{-1} (G* S G) Q_0^{-1} Psi ],

    every term carrying the small factor S linearly.  Resolves the Armijo
    test in the terminal phase where the decrease is below one ulp of J.
    """
    g_real = G.realization()
    F1 = series(prior.h_psi.realization, trial.qfact.delta_inv)
    F2 = series(g_real, trial.qfact.delta_inv)
    F3 = series(g_real, point.qfact.delta_inv)
    F4 = series(prior.h_psi.realization, point.qfact.delta_inv)
    integral = _trace_integral_sandwich(F1, F2, step_matrix, F3, F4)
    return float(t) * float(np.trace(step_matrix).real - integral.real)


def eval_gradient(basis, G, prior, point):
    """Gradient coordinates over basis.orthonormal.

    Component k is <I - int G Q^{-1} Psi Q^{-1} G*, orthonormal_k>.
    """
    return PointWorkspace(basis, G, prior, point).gradient


def eval_hessian_matrix(basis, G, prior, point):
    """Hessian of J at the point, as a real symmetric d x d matrix."""
    return PointWorkspace(basis, G, prior, point).hessian()


def newton_step(hessian, gradient):
    """Solve H step = -gradient by pseudoinverse.

    Raises DegenerateHessian when the smallest eigenvalue drops below
    1e-12 times the largest: the iterate left the region where the theory
    guarantees positive definiteness.
    """
    hessian = np.asarray(hessian, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    w = np.linalg.eigvalsh((hessian + hessian.T) / 2.0)
    if w[-1] <= 0.0 or w[0] < 1e-12 * w[-1]:
        raise DegenerateHessian(
            f"Hessian eigenvalues in [{w[0]:.3g}, {w[-1]:.3g}] are degenerate"
        )
    step, *_ = np.linalg.lstsq(hessian, -gradient, rcond=None)
    return step


@dataclass
class BacktrackResult:
    t: float
    point: LambdaPoint
    value: float
    decrease: float
    backtracks: int


# below this fraction of (1 + |J|) a decrease is not representable against
# J in double precision, so the Armijo test switches to the exact-difference
# evaluation
_PLAIN_ARMIJO_FLOOR = 1e-12


def backtrack(basis, G, prior, point, step, config, value=None, gradient=None):
    """Halve t = 1, 1/2, 1/4, ... until the trial point both factorizes
    (stays in the feasible set) and satisfies the Armijo decrease test.

    When the predicted decrease is below the floating-point resolution of
    J the test compares the exactly computed difference instead, so the
    terminal full steps of the quadratic phase are accepted on their
    merits rather than on rounding noise.
    """
    if value is None:
        value = eval_J(prior, point)
    if gradient is None:
        gradient = eval_gradient(basis, G, prior, point)
    step = np.asarray(step, dtype=float)
    slope = float(gradient @ step)
    if slope >= 0.0:
        raise DegenerateHessian(f"step is not a descent direction (slope {slope:.3g})")
    step_matrix = basis.combine(step)
    t = 1.0
    halvings = 0
    while True:
        if t < config.t_min:
            raise StepTooSmall(f"step length {t:.3g} below floor {config.t_min:.3g}")
        try:
            trial = lambda_point(basis, G, point.coords + t * step)
        except NotInDomain:
            t /= 2.0
            halvings += 1
            continue
        armijo_rhs = config.alpha * t * slope
        if abs(armijo_rhs) >= _PLAIN_ARMIJO_FLOOR * (1.0 + abs(value)):
            decrease = eval_J(prior, trial) - value
        else:
            decrease = exact_decrease(G, prior, point, trial, step_matrix, t)
        if decrease < armijo_rhs:
            return BacktrackResult(
                t=t,
                point=trial,
                value=value + decrease,
                decrease=decrease,
                backtracks=halvings,
            )
        t /= 2.0
        halvings += 1


def solve(basis, G, prior, config=None, initial_coords=None):
    """Newton iteration with backtracking from Lam = 0.

    Stops when the gradient norm falls below config.grad_tol; the returned
    trace records a strictly decreasing sequence of functional values.
    MaxIterations / StepTooSmall / DegenerateHessian carry the partial
    trace for diagnosis.
    """
    if config is None:
        config = SolverConfig()
    if initial_coords is None:
        initial_coords = np.zeros(basis.dimension)
    point = lambda_point(basis, G, initial_coords)
    trace = SolverTrace()
    while True:
        ws = PointWorkspace(basis, G, prior, point)
        grad = ws.gradient
        grad_norm = float(np.linalg.norm(grad))
        iteration = len(trace.steps)
        if grad_norm < config.grad_tol:
            trace.final = TraceRecord(
                iteration=iteration,
                J=ws.value,
                grad_norm=grad_norm,
                constraint_residual=ws.constraint_residual,
                t=0.0,
                backtracks=0,
            )
            return SolverResult(
                lambda_star=point,
                trace=trace,
                iterations=iteration,
                value=ws.value,
                grad_norm=grad_norm,
                constraint_residual=ws.constraint_residual,
            )
        if iteration >= config.max_iters:
            raise MaxIterations(
                f"no convergence after {iteration} steps (|grad| = {grad_norm:.3g})",
                trace=trace,
            )
        try:
            step = newton_step(ws.hessian(), grad)
            result = backtrack(
                basis, G, prior, point, step, config, value=ws.value, gradient=grad
            )
        except (DegenerateHessian, StepTooSmall) as err:
            err.trace = trace
            raise
        trace.steps.append(
            TraceRecord(
                iteration=iteration,
                J=ws.value,
                grad_norm=grad_norm,
                constraint_residual=ws.constraint_residual,
                t=result.t,
                backtracks=result.backtracks,
                decrease=result.decrease,
            )
        )
        point = result.point


def optimal_spectrum(prior, point):
    """Optimal left factor and spectrum at the solved multiplier.

    Phi_hat = Q^{-1} Psi Q^{-1} factored as (Delta^{-1} W_1)(...)* where W_1
    is a left factor of Delta^{-*} Psi Delta^{-1}.
    """
    from .distance import RationalSpectrum

    delta_inv = point.qfact.delta_inv
    w1 = right_to_left(
        balanced_minimal(minimal(series(prior.h_psi.realization, delta_inv)))
    ).realization
    w_hat = minimal(series(delta_inv, w1))
    return SpectralFactor(w_hat, "left"), RationalSpectrum(w_hat)
