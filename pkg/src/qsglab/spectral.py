"""Dense eigensolve and thermal quantities: Z, Gibbs averages, Duhamel brackets.

Every evaluation goes through the eigenbasis of H.  Energies are shifted by
the ground energy before exponentiation, so large beta never overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NumericalError

DEGENERACY_RTOL = 1e-9
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class SpectralData:
    energies: np.ndarray
    vectors: np.ndarray
    beta: float
    ground_shift: float

    @property
    def dim(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class GibbsContext:
    spectral: SpectralData
    log_z: float
    weights: np.ndarray

    @property
    def beta(self) -> float:
        return self.spectral.beta

    @property
    def dim(self) -> int:
        return self.spectral.dim

    def to_eigenbasis(self, O: np.ndarray) -> np.ndarray:
        O = np.asarray(O)
        if O.shape[-2:] != (self.dim, self.dim):
            raise ValueError(f"operator of shape {O.shape[-2:]} does not match dimension {self.dim}")
        V = self.spectral.vectors
        return V.conj().T @ O @ V

    @cached_property
    def kernel(self) -> np.ndarray:
        """``W(E_m, E_n) / Z`` so that ``(A,B)_D = sum_mn A_mn B_nm kernel_mn``."""
        E = self.spectral.energies
        p = self.weights
        beta = self.beta
        gap = np.abs(E[:, None] - E[None, :])
        width = E[-1] - E[0] if len(E) else 0.0
        p_low = np.where(E[:, None] <= E[None, :], p[:, None], p[None, :])
        y = beta * gap
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = np.where(y > 0, -np.expm1(-y) / y, 1.0)
        phi = np.where(gap < DEGENERACY_RTOL * max(1.0, width), 1.0, phi)
        K = p_low * phi
        K.setflags(write=False)
        return K


def diagonalize(H: np.ndarray, beta: float) -> GibbsContext:
    """Eigensolve a Hermitian H and build the Gibbs state at inverse temperature beta."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"Hamiltonian must be a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-12 * scale:
        raise ValueError("Hamiltonian is not Hermitian")
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be a finite non-negative number, got {beta!r}")
    try:
        E, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    shift = float(E[0])
    boltz = np.exp(-beta * (E - shift))
    z_shifted = boltz.sum()
    log_z = float(np.log(z_shifted) - beta * shift)
    weights = boltz / z_shifted
    for arr in (E, V, weights):
        arr.setflags(write=False)
    return GibbsContext(SpectralData(E, V, float(beta), shift), log_z, weights)


def thermal_trace(ctx: GibbsContext, O_eig: np.ndarray) -> complex:
    """``Tr[O rho]`` for an operator already in the eigenbasis (any, not just Hermitian)."""
    return complex(np.dot(ctx.weights, np.diagonal(O_eig)))


def duhamel_eig(ctx: GibbsContext, A_eig: np.ndarray, B_eig: np.ndarray) -> complex:
    """Two-operator Duhamel bracket for operators already in the eigenbasis."""
    return complex(np.sum(A_eig * B_eig.T * ctx.kernel))


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise NumericalError(f"{what} has imaginary residue {value.imag:.3e}")
    return float(value.real)


def gibbs_expectation(ctx: GibbsContext, O: np.ndarray) -> float:
    """``Tr[O e^{-beta H}] / Z`` for Hermitian O."""
    V = ctx.spectral.vectors
    O = np.asarray(O)
    if O.shape != (ctx.dim, ctx.dim):
        raise ValueError(f"operator of shape {O.shape} does not match dimension {ctx.dim}")
    diag = np.einsum("ik,ik->k", V.conj(), O @ V)
    return _real(complex(np.dot(ctx.weights, diag)), "Gibbs expectation")


def duhamel_bracket(ctx: GibbsContext, A: np.ndarray, B: np.ndarray) -> float:
    """``(A, B)_D`` through the closed spectral kernel; A and B Hermitian."""
    return _real(duhamel_eig(ctx, ctx.to_eigenbasis(A), ctx.to_eigenbasis(B)), "Duhamel bracket")


def free_energy_density(ctx: GibbsContext, volume: int) -> float:
    if volume <= 0:
        raise ValueError("volume must be positive")
    return ctx.log_z / volume


@dataclass(frozen=True)
class HarrisTerms:
    lower: float
    middle: float
    upper: float


def harris_terms(ctx: GibbsContext, O: np.ndarray, H: np.ndarray) -> HarrisTerms:
    """``((O,O)_D, <O^2>, (O,O)_D + beta/12 <[O,[H,O]]>)``."""
    O_e = ctx.to_eigenbasis(O)
    H_e = ctx.to_eigenbasis(H)
    lower = _real(duhamel_eig(ctx, O_e, O_e), "Duhamel bracket")
    middle = _real(thermal_trace(ctx, O_e @ O_e), "<O^2>")
    comm = H_e @ O_e - O_e @ H_e
    double = O_e @ comm - comm @ O_e
    upper = lower + ctx.beta / 12 * _real(thermal_trace(ctx, double), "double commutator")
    return HarrisTerms(lower, middle, upper)
