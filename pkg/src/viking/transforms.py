"""State-noise transforms and the log-det objective driving their update.

A latent vector ``b`` parameterizes the state-noise covariance through a map
that is zero on negatives and ``log(1+b)`` on nonnegatives, applied either as
one shared coefficient times the identity (scalar kind) or coordinate-wise on
the diagonal (diagonal kind). Keeping the active branch concave is what makes
belief uncertainty shrink, rather than inflate, the filter's effective step.

``psi_value`` is the objective ``logdet(C(b)) + tr(B C(b)^-1)`` with
``C(b) = KPK + f(b)``. ``psi_gradient`` returns its gradient at an expansion
point and ``psi_hessian_bound`` a symmetric PSD matrix dominating its Hessian
there; both take ``C`` precomputed so callers control how often it is
factored. At the kink ``b = 0`` the derivative helpers use the right limits
(``phi_d1(0) = 1``, ``phi_d2(0) = -1``), which keeps the update formulas
continuous as a clamped latent approaches zero from above.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import spd_factor, spd_inv, sym

import scipy.linalg


class TransformKind(Enum):
    SCALAR = "scalar"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class NoiseTransform:
    """Mapping from the noise latent to a PSD diagonal state-noise matrix.

    ``dim`` is the state dimension. The scalar kind has a 1-dimensional
    latent and produces ``phi(b) * I``; the diagonal kind has a
    ``dim``-dimensional latent mapped coordinate-wise onto the diagonal.
    """

    kind: TransformKind
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"state dimension must be >= 1, got {self.dim}")

    @property
    def latent_dim(self) -> int:
        return 1 if self.kind is TransformKind.SCALAR else self.dim

    @classmethod
    def scalar(cls, dim: int) -> "NoiseTransform":
        return cls(TransformKind.SCALAR, dim)

    @classmethod
    def diagonal(cls, dim: int) -> "NoiseTransform":
        return cls(TransformKind.DIAGONAL, dim)


def phi(b: float) -> float:
    """Zero on negatives, ``log(1+b)`` on nonnegatives."""
    return 0.0 if b < 0.0 else float(np.log1p(b))


def phi_d1(b: float) -> float:
    """First derivative of :func:`phi`; right limit 1 at the kink."""
    return 0.0 if b < 0.0 else 1.0 / (1.0 + b)


def phi_d2(b: float) -> float:
    """Second derivative of :func:`phi`; right limit -1 at the kink."""
    return 0.0 if b < 0.0 else -1.0 / (1.0 + b) ** 2


def _phi_vec(b: np.ndarray) -> np.ndarray:
    return np.where(b >= 0.0, np.log1p(np.maximum(b, 0.0)), 0.0)


def _phi_d1_vec(b: np.ndarray) -> np.ndarray:
    return np.where(b >= 0.0, 1.0 / (1.0 + np.maximum(b, 0.0)), 0.0)


def _phi_d2_vec(b: np.ndarray) -> np.ndarray:
    return np.where(b >= 0.0, -1.0 / (1.0 + np.maximum(b, 0.0)) ** 2, 0.0)


def _check_latent(transform: NoiseTransform, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (transform.latent_dim,):
        raise ValueError(
            f"latent has shape {b.shape}, expected ({transform.latent_dim},) for kind {transform.kind.value}"
        )
    return b


def noise_diag(transform: NoiseTransform, b: np.ndarray) -> np.ndarray:
    """Diagonal of ``f(b)`` as a length-``dim`` vector."""
    b = _check_latent(transform, b)
    if transform.kind is TransformKind.SCALAR:
        return np.full(transform.dim, phi(float(b[0])))
    return _phi_vec(b)


def noise_diag_batch(transform: NoiseTransform, draws: np.ndarray) -> np.ndarray:
    """Diagonals of ``f(b_i)`` for a ``(k, latent_dim)`` stack of latents."""
    if transform.kind is TransformKind.SCALAR:
        coeff = _phi_vec(draws[:, 0])
        return np.repeat(coeff[:, None], transform.dim, axis=1)
    return _phi_vec(draws)


def apply_f(transform: NoiseTransform, b: np.ndarray) -> np.ndarray:
    """PSD diagonal state-noise matrix ``f(b)``."""
    return np.diag(noise_diag(transform, b))


def psi_value(transform: NoiseTransform, b: np.ndarray, B: np.ndarray, KPK: np.ndarray) -> float:
    """``logdet(KPK + f(b)) + tr(B (KPK + f(b))^-1)``."""
    C = KPK + apply_f(transform, b)
    factor = spd_factor(C)
    logdet = 2.0 * np.sum(np.log(np.diagonal(factor)))
    trace = np.trace(scipy.linalg.cho_solve((factor, True), B, check_finite=False))
    return float(logdet + trace)


def _gradient_from_inv(transform: NoiseTransform, b_hat: np.ndarray, B: np.ndarray, C_inv: np.ndarray) -> np.ndarray:
    G = C_inv - C_inv @ B @ C_inv
    if transform.kind is TransformKind.SCALAR:
        return np.array([np.trace(G) * phi_d1(float(b_hat[0]))])
    return np.diagonal(G) * _phi_d1_vec(b_hat)


def _hessian_bound_from_inv(transform: NoiseTransform, b_hat: np.ndarray, B: np.ndarray, C_inv: np.ndarray) -> np.ndarray:
    MBM = C_inv @ B @ C_inv
    if transform.kind is TransformKind.SCALAR:
        d1 = phi_d1(float(b_hat[0]))
        d2 = phi_d2(float(b_hat[0]))
        h = -np.trace(MBM) * d2 + 2.0 * np.trace(C_inv @ MBM) * d1 * d1
        return np.array([[h]])
    d1 = _phi_d1_vec(b_hat)
    d2 = _phi_d2_vec(b_hat)
    H = 2.0 * MBM * C_inv * (d1[:, None] * d1)
    H[np.arange(len(b_hat)), np.arange(len(b_hat))] -= np.diagonal(MBM) * d2
    return sym(H)


def _check_expansion_point(transform: NoiseTransform, b_hat: np.ndarray) -> None:
    if np.any(b_hat <= 0.0):
        raise ValueError(
            "hessian bound requires f(b_hat) positive definite: every latent coordinate must be > 0"
        )


def psi_gradient(transform: NoiseTransform, b_hat: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Gradient of ``psi`` at ``b_hat``, with ``C = KPK + f(b_hat)`` precomputed."""
    b_hat = _check_latent(transform, b_hat)
    return _gradient_from_inv(transform, b_hat, B, spd_inv(C))


def psi_hessian_bound(transform: NoiseTransform, b_hat: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Symmetric PSD matrix dominating the Hessian of ``psi`` at ``b_hat``.

    Requires every coordinate of ``b_hat`` strictly positive (callers clamp
    their latents to a small positive floor before evaluating this).
    """
    b_hat = _check_latent(transform, b_hat)
    _check_expansion_point(transform, b_hat)
    return _hessian_bound_from_inv(transform, b_hat, B, spd_inv(C))


def psi_gradient_hessian_bound(
    transform: NoiseTransform, b_hat: np.ndarray, B: np.ndarray, C: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian bound sharing a single factorization of ``C``."""
    b_hat = _check_latent(transform, b_hat)
    _check_expansion_point(transform, b_hat)
    C_inv = spd_inv(C)
    return (
        _gradient_from_inv(transform, b_hat, B, C_inv),
        _hessian_bound_from_inv(transform, b_hat, B, C_inv),
    )
