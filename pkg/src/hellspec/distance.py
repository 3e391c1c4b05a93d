"""Hellinger distance between matrix spectral densities.

The squared distance between two spectra is the integral of

    tr[ Psi + Phi - 2 (Phi^{1/2} Psi Phi^{1/2})^{1/2} ],

the pointwise minimum over square factor pairs of tr (W_Psi - W_Phi)(...)*.
Spectra are compared as Hermitian samples on a common frequency grid.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPD
from .factorization import lyapunov_integral
from .realization import Realization, sample_on_grid


@dataclass(frozen=True)
class RationalSpectrum:
    """Spectrum Phi = W W* carried by a stable left factor W."""

    factor: Realization

    @property
    def m(self):
        return self.factor.n_outputs

    def sample(self, thetas):
        W = sample_on_grid(self.factor, thetas)
        return W @ W.conj().transpose(0, 2, 1)

    def integral(self):
        return lyapunov_integral(self.factor)


def _psd_sqrt_stack(mats):
    w, V = np.linalg.eigh(mats)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)[..., None, :]) @ V.conj().transpose(0, 2, 1)


def hellinger_distance(psi_samples, phi_samples):
    """Hellinger distance between two spectra sampled on the same grid.

    Both stacks must be Hermitian positive definite at every node; raises
    NotPD otherwise.  Reduces to the ordinary scalar Hellinger distance
    integral of (sqrt(Psi) - sqrt(Phi))^2 when m = 1.
    """
    psi = np.asarray(psi_samples, dtype=complex)
    phi = np.asarray(phi_samples, dtype=complex)
    if psi.shape != phi.shape or psi.ndim != 3 or psi.shape[1] != psi.shape[2]:
        raise DimensionMismatch(
            f"incompatible sample stacks {psi.shape} and {phi.shape}"
        )
    for name, stack in (("Psi", psi), ("Phi", phi)):
        eigs = np.linalg.eigvalsh(stack)
        if eigs.min() <= 0.0:
            raise NotPD(f"{name} is not positive definite at some grid node")
    phi_half = _psd_sqrt_stack(phi)
    inner = _psd_sqrt_stack(phi_half @ psi @ phi_half)
    integrand = np.trace(psi + phi - 2.0 * inner, axis1=1, axis2=2).real
    d_squared = float(np.mean(integrand))
    return float(np.sqrt(max(d_squared, 0.0)))
