"""Spectral estimation from finite data records.

A filter bank G(z) = (zI - A)^{-1} B is fed the data; the steady-state
covariance of its state is estimated, projected onto the feasible set, and
the constrained approximation problem is solved against a coarse prior
spectrum.  Includes the simulation scenarios used by the command line.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.signal

from .distance import RationalSpectrum, hellinger_distance, sample_spectrum
from .errors import (
    DegenerateSamples,
    DuplicatePole,
    HellspecError,
    InfeasibleSigma,
    PipelineStageError,
    PoleOutsideDisk,
    ProjectionNotPD,
    SingularToeplitz,
    TooFewSamples,
)
from .gamma import (
    FilterBank,
    build_gamma_basis,
    feasibility_check,
    normalize_to_identity,
    project_onto_range,
)
from .linalg import hermitian_sqrt, hermitize, min_eigenvalue
from .newton import Prior, SolverConfig, optimal_spectrum, solve
from .realization import Realization, constant


def build_G_covariance_extension(n):
    """Shift-register bank whose steady-state covariance is Toeplitz in the
    first n covariance lags of the input."""
    if n < 1:
        raise ValueError("need at least one lag")
    A = np.diag(np.ones(n - 1), k=1)
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    return FilterBank(A=A, B=B)


def build_G_from_poles(poles, real_structured=False):
    """Diagonal (or real block-diagonal) bank with B a column of ones.

    Distinct poles inside the unit circle; with real_structured the complex
    poles must come in conjugate pairs and are assembled as real 2x2 blocks.
    """
    poles = [complex(p) for p in poles]
    for p in poles:
        if abs(p) >= 1.0:
            raise PoleOutsideDisk(f"pole {p} is not inside the unit circle")
    for i, p in enumerate(poles):
        for q in poles[i + 1 :]:
            if abs(p - q) <= 1e-12 * max(1.0, abs(p)):
                raise DuplicatePole(f"repeated pole {p} breaks reachability")
    if not real_structured:
        return FilterBank(A=np.diag(poles), B=np.ones((len(poles), 1)))

    blocks = []
    remaining = list(poles)
    while remaining:
        p = remaining.pop(0)
        if abs(p.imag) <= 1e-12:
            blocks.append(np.array([[p.real]]))
            continue
        match = next(
            (q for q in remaining if abs(q - p.conjugate()) <= 1e-12 * max(1.0, abs(p))),
            None,
        )
        if match is None:
            raise DuplicatePole(f"pole {p} lacks its conjugate for a real block")
        remaining.remove(match)
        blocks.append(np.array([[p.real, abs(p.imag)], [-abs(p.imag), p.real]]))
    A = sla.block_diag(*blocks)
    return FilterBank(A=A, B=np.ones((A.shape[0], 1)))


# pole list of the sinusoid-detection scenario: resolution concentrated in
# the band where the two target frequencies lie
SINUSOID_BANK_POLES = (
    [0.0, 0.85, -0.85]
    + [0.9 * np.exp(1j * w) for w in (0.42, 0.44, 0.46, 0.48, 0.50)]
    + [0.9 * np.exp(-1j * w) for w in (0.42, 0.44, 0.46, 0.48, 0.50)]
)


def sinusoid_detection_bank():
    return build_G_from_poles(SINUSOID_BANK_POLES, real_structured=True)


def _as_samples(y):
    y = np.asarray(y)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ValueError(f"time series must be 1-d or 2-d, got shape {y.shape}")
    if not np.all(np.isfinite(y.real)) or not np.all(np.isfinite(np.asarray(y, dtype=complex).imag)):
        raise ValueError("time series contains non-finite values")
    return np.asarray(y, dtype=complex)


def default_burn_in(n):
    return max(10 * n, 100)


def filter_covariance(G, y, burn_in=None):
    """Sample covariance of the bank state driven by the data.

    Runs x_{t+1} = A x_t + B y_{t+1} from x_0 = 0 and averages x_t x_t*
    over t > burn_in.  The recursion is evaluated as a convolution with the
    impulse response truncated below machine precision, which is exact for
    nilpotent A and within 1e-15 otherwise.
    """
    y = _as_samples(y)
    N, m = y.shape
    if m != G.m:
        raise ValueError(f"data has {m} channels, bank expects {G.m}")
    M = default_burn_in(G.n) if burn_in is None else int(burn_in)
    if not 0 <= M < N:
        raise TooFewSamples(f"burn-in {M} incompatible with {N} samples")
    if N - M < 10 * G.n:
        raise TooFewSamples(f"{N - M} post-burn-in samples < 10 n = {10 * G.n}")

    kernels = [np.asarray(G.B, dtype=complex)]
    A = np.asarray(G.A, dtype=complex)
    while len(kernels) < N:
        nxt = A @ kernels[-1]
        if np.linalg.norm(nxt) <= 1e-15 * np.linalg.norm(G.B):
            break
        kernels.append(nxt)
    kernel = np.stack(kernels)  # (K, n, m)
    # x_t = sum_j kernel[j] y_{t-j}; states x_1..x_N live at conv indices 0..N-1
    conv = scipy.signal.fftconvolve(y[:, None, :], kernel, axes=0)[:N]
    x = conv.sum(axis=2)  # (N, n)
    tail = x[M:]
    Sigma = np.einsum("ti,tj->ij", tail, tail.conj()) / (N - M)
    return hermitize(Sigma)


def prepare_sigma(basis, Sigma_hat):
    """Orthogonal projection of the estimated covariance onto Range Gamma.

    The projection of a positive definite matrix need not stay positive
    definite; that failure aborts the pipeline.
    """
    projected = project_onto_range(basis, hermitize(Sigma_hat))
    floor = 1e-8 * max(np.linalg.norm(projected, 2), 1e-300)
    if min_eigenvalue(projected) <= floor:
        raise ProjectionNotPD(
            "projected covariance is not positive definite; more data or a "
            "smaller bank is needed"
        )
    return projected


def constant_prior(y):
    """Constant prior equal to the sample covariance of the data."""
    y = _as_samples(y)
    N = y.shape[0]
    if N < 2:
        raise DegenerateSamples("need at least two samples")
    Psi = np.einsum("ti,tj->ij", y, y.conj()) / (N - 1)
    Psi = hermitize(Psi)
    if min_eigenvalue(Psi) <= 0.0:
        raise DegenerateSamples("sample covariance is singular")
    return Prior.from_left_factor(constant(hermitian_sqrt(Psi)))


def _ar_realization(a_tail, sigma_e):
    """Realization of sigma_e / a(z) with a(z) = 1 + a_1 z^-1 + ... + a_p z^-p."""
    a_tail = np.asarray(a_tail, dtype=float)
    p = a_tail.size
    if p == 0:
        return constant(np.array([[sigma_e]]))
    A = np.zeros((p, p))
    A[0, :] = -a_tail
    if p > 1:
        A[1:, :-1] = np.eye(p - 1)
    B = np.zeros((p, 1))
    B[0, 0] = 1.0
    C = -sigma_e * a_tail[None, :]
    D = np.array([[sigma_e]])
    return Realization(A, B, C, D)


def _reflect_unstable_roots(a_tail):
    """Reflect roots of z^p + a_1 z^{p-1} + ... + a_p outside the disk.

    Returns the stabilized tail and the factor by which the polynomial
    magnitude shrank on the circle (to rescale the innovation variance).
    """
    a_tail = np.asarray(a_tail, dtype=float)
    if a_tail.size == 0:
        return a_tail, 1.0
    roots = np.roots(np.concatenate([[1.0], a_tail]))
    scale = 1.0
    changed = False
    fixed = []
    for r in roots:
        if abs(r) >= 1.0 - 1e-10:
            scale /= abs(r)
            r = 1.0 / np.conj(r) * (1.0 - 1e-8)
            changed = True
        fixed.append(r)
    if not changed:
        return a_tail, 1.0
    poly = np.real(np.poly(fixed))
    return poly[1:], scale


def ar_prior(a_tail, sigma_e):
    """Prior Psi = |sigma_e / a(e^{j theta})|^2 from AR coefficients.

    a_tail holds a_1..a_p of a(z) = 1 + a_1 z^-1 + ... + a_p z^-p; unstable
    roots are reflected into the disk, which leaves Psi unchanged up to the
    matching variance rescaling.
    """
    a_tail, scale = _reflect_unstable_roots(a_tail)
    return Prior.from_left_factor(_ar_realization(a_tail, float(sigma_e) * scale))


def yule_walker_prior(y, order):
    """AR(order) prior fitted by the autocovariance normal equations.

    Order 0 reduces to the constant prior by construction.
    """
    y = _as_samples(y)
    if y.shape[1] != 1:
        raise ValueError("autoregressive priors are for scalar series")
    y = y[:, 0]
    N = y.size
    order = int(order)
    if order < 0 or order > 10:
        raise ValueError("order must lie in 0..10")
    if N < 2 * (order + 1):
        raise DegenerateSamples("series too short for the requested order")
    r = np.array(
        [np.sum(y[k:] * np.conj(y[: N - k])) / (N - 1) for k in range(order + 1)]
    )
    if order == 0:
        sigma2 = r[0].real
        if sigma2 <= 0.0:
            raise DegenerateSamples("zero sample variance")
        return Prior.from_left_factor(constant(np.array([[np.sqrt(sigma2)]])))
    try:
        phi = sla.solve_toeplitz((r[:order], np.conj(r[:order])), r[1 : order + 1])
    except np.linalg.LinAlgError as err:
        raise SingularToeplitz(f"normal equations are singular: {err}") from err
    sigma2 = float((r[0] - np.sum(phi * np.conj(r[1 : order + 1]))).real)
    if not np.isfinite(sigma2) or sigma2 <= 0.0:
        raise SingularToeplitz("innovation variance came out non-positive")
    a_tail = -np.real(phi)
    return ar_prior(a_tail, np.sqrt(sigma2))


# ARMA scenario: recursion coefficients chosen so that the AR polynomial has
# roots exactly {0.9, -0.2 +/- 0.7j, +/- 0.5j}; the published 4-decimal
# rounding of the last coefficient (0.1192) moves the roots by ~1e-5
ARMA_AR = np.array([0.5, -0.42, 0.602, -0.0425, 0.11925])
ARMA_MA = np.array([1.0, 1.1, 0.08, -0.15])


def arma_true_spectrum():
    """Exact rational spectrum of the ARMA scenario as a factor realization."""
    num = np.concatenate([ARMA_MA, np.zeros(len(ARMA_AR) + 1 - len(ARMA_MA))])
    den = np.concatenate([[1.0], -ARMA_AR])
    A, B, C, D = scipy.signal.tf2ss(num, den)
    return RationalSpectrum(Realization(A, B, C, D))


def generate_arma_example(N, seed, warmup=500):
    """Samples of the ARMA(5,3) scenario driven by unit Gaussian noise."""
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(N + warmup)
    den = np.concatenate([[1.0], -ARMA_AR])
    y = scipy.signal.lfilter(ARMA_MA, den, e)[warmup:]
    return y, arma_true_spectrum()


SINUSOID_FREQS = (0.42, 0.53)


def sinusoid_noise_spectrum():
    """Spectrum of the colored-noise component of the sinusoid scenario."""
    A, B, C, D = scipy.signal.tf2ss([0.5, 0.25], [1.0, -0.8])
    return RationalSpectrum(Realization(A, B, C, D))


def generate_sinusoids_example(N, seed, warmup=200):
    """Two sinusoids with random phases in colored noise.

    y(t) = 0.5 sin(w1 t + p1) + 0.5 sin(w2 t + p2) + z(t), with
    z(t) = 0.8 z(t-1) + 0.5 nu(t) + 0.25 nu(t-1) and p1, p2, nu standard
    normal.
    """
    rng = np.random.default_rng(seed)
    p1, p2 = rng.standard_normal(2)
    nu = rng.standard_normal(N + warmup)
    z = scipy.signal.lfilter([0.5, 0.25], [1.0, -0.8], nu)[warmup:]
    t = np.arange(1, N + 1)
    y = (
        0.5 * np.sin(SINUSOID_FREQS[0] * t + p1)
        + 0.5 * np.sin(SINUSOID_FREQS[1] * t + p2)
        + z
    )
    return y, sinusoid_noise_spectrum()


BIVARIATE_POLE = 0.9 * np.exp(1j * 0.52)
BIVARIATE_ZERO = (1.0 - 1e-5) * np.exp(1j * 0.2)


def _scalar_biquad(zero, pole):
    num = np.real(np.poly([zero, np.conj(zero)]))
    den = np.real(np.poly([pole, np.conj(pole)]))
    A, B, C, D = scipy.signal.tf2ss(num, den)
    return Realization(A, B, C, D)


def bivariate_shaping_filter(seed, order=40):
    """Square bivariate shaping filter of the given order.

    One conjugate pole pair is pinned at 0.9 e^{+/- j 0.52} and one
    conjugate zero pair at (1 - 1e-5) e^{+/- j 0.2}; the remaining
    dynamics are random conjugate-closed pole blocks drawn uniformly from
    the disk of radius 0.95, with Gaussian couplings.
    """
    from .realization import series

    rng = np.random.default_rng(seed)
    n_random = order - 4  # the pinned biquad contributes 2 states per channel
    blocks = []
    while sum(b.shape[0] for b in blocks) < n_random:
        radius = 0.95 * np.sqrt(rng.uniform())
        angle = rng.uniform(0.0, np.pi)
        a, b = radius * np.cos(angle), radius * np.sin(angle)
        blocks.append(np.array([[a, b], [-b, a]]))
    A0 = sla.block_diag(*blocks)[:n_random, :n_random]
    B0 = rng.standard_normal((n_random, 2))
    C0 = rng.standard_normal((2, n_random)) / np.sqrt(n_random)
    D0 = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
    F0 = Realization(A0, B0, C0, D0)

    biquad = _scalar_biquad(BIVARIATE_ZERO, BIVARIATE_POLE)
    A_s = sla.block_diag(biquad.A, biquad.A)
    B_s = sla.block_diag(biquad.B, biquad.B)
    C_s = sla.block_diag(biquad.C, biquad.C)
    D_s = float(biquad.D[0, 0]) * np.eye(2)
    pinned = Realization(A_s, B_s, C_s, D_s)
    return series(F0, pinned)


def generate_bivariate_example(N, seed, warmup=1000):
    """Bivariate data through the order-40 shaping filter, plus the exact
    spectrum of the filter."""
    filt = bivariate_shaping_filter(seed)
    rng = np.random.default_rng(seed + 1)
    e = rng.standard_normal((N + warmup, 2))
    n = filt.n_states
    x = np.zeros(n, dtype=complex)
    out = np.empty((N + warmup, 2))
    A, B, C, D = filt.A, filt.B, filt.C, filt.D
    for t in range(N + warmup):
        out[t] = np.real(C @ x + D @ e[t])
        x = A @ x + B @ e[t]
    return out[warmup:], RationalSpectrum(filt)


def bivariate_default_bank():
    """One pole at the origin plus 4 conjugate pairs of radius 0.9 equispaced
    in [0, pi]."""
    freqs = np.linspace(0.0, np.pi, 6)[1:-1]
    poles = [0.0]
    for w in freqs:
        poles += [0.9 * np.exp(1j * w), 0.9 * np.exp(-1j * w)]
    return build_G_from_poles(poles, real_structured=True)


@dataclass
class EstimationConfig:
    burn_in: int = None              # None -> max(10 n, 100)
    prior: object = "constant"       # "constant" | ("yw", order) | ("ar", a_tail, sigma_e)
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid_count: int = 2048
    feasibility_tol: float = 1e-8


@dataclass
class EstimationResult:
    phi_hat: RationalSpectrum
    w_hat: object
    lambda_star: object
    solver: object
    prior: Prior
    sigma_hat: np.ndarray
    sigma_projected: np.ndarray
    bank_normalized: FilterBank
    constraint_residual: float
    hellinger_to_prior: float
    grid_thetas: np.ndarray


def _build_prior(spec, y):
    if isinstance(spec, Prior):
        return spec
    if spec == "constant":
        return constant_prior(y)
    kind = spec[0]
    if kind == "yw":
        return yule_walker_prior(y, spec[1])
    if kind == "ar":
        return ar_prior(spec[1], spec[2])
    raise ValueError(f"unknown prior specification {spec!r}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HellspecError as err:
        if isinstance(err, PipelineStageError):
            raise
        raise PipelineStageError(name, err) from err


def estimate_spectrum(y, G, config=None):
    """Full estimation pipeline.

    filter covariance -> projection to feasibility -> constraint
    normalization -> prior -> Newton solve -> optimal spectrum.  The
    normalization leaves the estimated spectrum invariant; only the bank
    is rescaled.
    """
    if config is None:
        config = EstimationConfig()
    y = _as_samples(y)
    sigma_hat = _stage("filter-covariance", filter_covariance, G, y, config.burn_in)
    basis = _stage("basis", build_gamma_basis, G)
    sigma_proj = _stage("projection", prepare_sigma, basis, sigma_hat)
    bank_n = _stage("normalization", normalize_to_identity, G, sigma_proj)
    basis_n = _stage("basis", build_gamma_basis, bank_n)
    check = feasibility_check(basis_n, np.eye(G.n), tol=config.feasibility_tol)
    if not check.feasible:
        raise PipelineStageError(
            "feasibility", InfeasibleSigma(f"residual {check.residual:.3g}")
        )
    prior = _stage("prior", _build_prior, config.prior, y)
    result = _stage("solve", solve, basis_n, bank_n, prior, config.solver)
    w_hat, phi_hat = _stage("spectrum", optimal_spectrum, prior, result.lambda_star)
    thetas = -np.pi + 2.0 * np.pi * np.arange(config.grid_count) / config.grid_count
    psi_samples = sample_spectrum(prior.w_psi.realization, thetas)
    phi_samples = phi_hat.sample(thetas)
    d_h = _stage("distance", hellinger_distance, psi_samples, phi_samples)
    return EstimationResult(
        phi_hat=phi_hat,
        w_hat=w_hat,
        lambda_star=result.lambda_star,
        solver=result,
        prior=prior,
        sigma_hat=sigma_hat,
        sigma_projected=sigma_proj,
        bank_normalized=bank_n,
        constraint_residual=result.constraint_residual,
        hellinger_to_prior=d_h,
        grid_thetas=thetas,
    )
