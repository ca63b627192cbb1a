"""Q-Wiener noise spectra and exact stochastic-convolution increments.

Over one step of length h, mode n of the damped-wave and heat stochastic
convolutions receives the Gaussian increment

    wave-u:  (sqrt(q)/eps) int_0^h f01(s) dB(s)
    wave-v:  (sqrt(q)/eps) int_0^h g01(s) dB(s)
    heat:     sqrt(q)      int_0^h e^{-lam s} dB(s)

driven by the same scalar Brownian motion B (time reversed inside the step).
Their joint covariance follows from the Ito isometry; sampling it exactly
removes any time-discretisation bias from the noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from .propagators import integrate, mode_entries

KINDS = ("white", "power", "trace-class", "none")

# eigenvalue clip allowed relative to the trace before factorisation fails
CLIP_RTOL = 1e-12


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseSpectrum:
    q: np.ndarray
    kind: str
    beta: float
    gamma: float | None = None

    @property
    def label(self) -> str:
        if self.kind == "power":
            # interpolating family, not one singled out by the theory
            return f"power(gamma={self.gamma:g}, interpolated)"
        return self.kind


def make_spectrum(kind: str, N: int, gamma: float | None = None) -> NoiseSpectrum:
    """Covariance eigenvalues q_n for n = 1..N and the regularity exponent.

    ``power`` uses q_n = n^{-2 gamma}; with lambda_n ~ n^2 the series
    sum q_n lambda_n^{alpha - 1} converges iff alpha < gamma + 1/2, so
    beta = min(gamma + 1/2, 1).  ``white`` is gamma = 0 and ``trace-class``
    the preset gamma = 1.  ``none`` switches the noise off (q = 0) for
    deterministic checks; its beta is reported as 1.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(1, N + 1, dtype=float)
    if kind == "none":
        q = np.zeros(N)
        q.setflags(write=False)
        return NoiseSpectrum(q, kind, 1.0)
    if kind == "white":
        g = 0.0
    elif kind == "trace-class":
        g = 1.0
    elif kind == "power":
        if gamma is None or gamma < 0:
            raise ValueError("power spectrum needs gamma >= 0")
        g = float(gamma)
    else:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {KINDS}")
    q = n ** (-2.0 * g)
    q.setflags(write=False)
    return NoiseSpectrum(q, kind, min(g + 0.5, 1.0), g if kind == "power" else None)


def regularity_partial_sums(gamma: float, alpha: float, n_max: int) -> np.ndarray:
    """Partial sums of q_n lambda_n^{alpha-1} for the power family."""
    n = np.arange(1, n_max + 1, dtype=float)
    terms = n ** (-2.0 * gamma) * ((n * np.pi) ** 2) ** (alpha - 1.0)
    return np.cumsum(terms)


def heat_increment_var(lam, q, h):
    """q (1 - e^{-2 lam h}) / (2 lam)."""
    lam = np.asarray(lam, dtype=float)
    out = np.asarray(q, dtype=float) * -np.expm1(-2.0 * lam * h) / (2.0 * lam)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=256)
def _unit_integrals(eps, h, lam_bytes):
    """Per-unit-q Ito integrals, columns (uu, vv, uv, uh, vh)."""
    lam = np.frombuffer(lam_bytes)

    def integrand(s):
        _, f01, _, g01 = mode_entries(eps, lam[None, :], s[:, None])
        decay = np.exp(-lam[None, :] * s[:, None])
        fu = f01 / eps
        fv = g01 / eps
        return np.stack([fu * fu, fv * fv, fu * fv, fu * decay, fv * decay], axis=-1)

    out = integrate(integrand, h)
    out.setflags(write=False)
    return out


def wave_increment_cov(eps, lam, q, h):
    """2x2 covariance of the (u, v) wave increment, shape (..., 2, 2)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    q = np.broadcast_to(np.asarray(q, dtype=float), lam.shape)
    I = _unit_integrals(float(eps), float(h), lam.tobytes())
    C = np.empty(lam.shape + (2, 2))
    C[..., 0, 0] = q * I[:, 0]
    C[..., 1, 1] = q * I[:, 1]
    C[..., 0, 1] = C[..., 1, 0] = q * I[:, 2]
    return C


@dataclass(frozen=True)
class IncrementCovariance:
    """Per-mode 3x3 covariances over (wave-u, wave-v, heat) and their factors."""

    matrix: np.ndarray     # (N, 3, 3)
    factor: np.ndarray     # (N, 3, 3), factor @ factor.T = clipped matrix
    clip: np.ndarray       # (N,) size of the negative-eigenvalue clip per mode
    eps: float
    h: float

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]


def joint_increment_cov(eps, lam, q, h) -> IncrementCovariance:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    q = np.broadcast_to(np.asarray(q, dtype=float), lam.shape)
    I = _unit_integrals(float(eps), float(h), lam.tobytes())
    C = np.zeros(lam.shape + (3, 3))
    C[:, :2, :2] = wave_increment_cov(eps, lam, q, h)
    C[:, 2, 2] = heat_increment_var(lam, q, h)
    C[:, 0, 2] = C[:, 2, 0] = q * I[:, 3]
    C[:, 1, 2] = C[:, 2, 1] = q * I[:, 4]
    # factor in the order (heat, wave-u, wave-v): the heat increment then uses
    # the first normal alone and is identical for every eps sharing a stream
    perm = [2, 0, 1]
    Lp, clip = psd_factor(C[:, perm][:, :, perm])
    factor = np.empty_like(Lp)
    factor[:, perm, :] = Lp
    # exact in arithmetic already; pin it so eps-independence is bitwise
    factor[:, 2, :] = 0.0
    factor[:, 2, 0] = np.sqrt(C[:, 2, 2])
    for a in (C, factor, clip):
        a.setflags(write=False)
    return IncrementCovariance(C, factor, clip, float(eps), float(h))


def psd_factor(C):
    """Lower-triangular factors of symmetric PSD matrices (..., k, k).

    Negative eigenvalues down to -CLIP_RTOL * trace are clipped to zero;
    anything more negative raises FactorizationError.
    """
    C = np.asarray(C, dtype=float)
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    w, V = np.linalg.eigh(C)
    trace = np.trace(C, axis1=-2, axis2=-1)
    floor = -CLIP_RTOL * np.maximum(trace, 0.0)
    if np.any(w < floor[..., None]):
        bad = np.argwhere(np.any(w < floor[..., None], axis=-1))
        raise FactorizationError(
            f"covariance not positive semidefinite at index {bad[0].tolist()} "
            "(quadrature tolerance too loose?)")
    clip = -np.minimum(w, 0.0).sum(axis=-1)
    w = np.maximum(w, 0.0)
    Cc = (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)
    return _semidefinite_cholesky(Cc), clip


def _semidefinite_cholesky(C):
    k = C.shape[-1]
    L = np.zeros_like(C)
    tiny = 1e-15 * np.maximum(np.trace(C, axis1=-2, axis2=-1), 1e-300)
    for j in range(k):
        d = C[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        ok = d > tiny
        root = np.sqrt(np.where(ok, d, 1.0))
        L[..., j, j] = np.where(ok, root, 0.0)
        for i in range(j + 1, k):
            off = C[..., i, j] - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)
            L[..., i, j] = np.where(ok, off / root, 0.0)
    return L


# ---------------------------------------------------------------------------
# Random streams

# random() yields k * 2^-53; shifting by half a unit keeps draws inside (0, 1)
_HALF_ULP = 2.0**-54


def replica_stream(seed: int, replica: int) -> np.random.Generator:
    """Counter-based stream for one replica.

    The stream depends on (seed, replica) only, so every eps in a sweep sees
    the same uniforms for a given replica (common random numbers).
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.Philox(ss))


def draw_uniforms(rng: np.random.Generator, steps: int, n_modes: int) -> np.ndarray:
    """(steps, n_modes, 3) uniforms, step-major then mode then component."""
    return rng.random((steps, n_modes, 3)) + _HALF_ULP


def uniforms_to_increments(cov: IncrementCovariance, uniforms) -> np.ndarray:
    """Map (..., N, 3) uniforms to correlated Gaussian triples (..., N, 3).

    Output components are (wave-u, wave-v, heat); the latent normals are
    consumed in the order (heat, wave-u, wave-v).
    """
    z = ndtri(np.asarray(uniforms))
    return np.einsum("nij,...nj->...ni", cov.factor, z)


def sample_increments(cov: IncrementCovariance, rng: np.random.Generator) -> np.ndarray:
    """One step of increments, shape (N, 3); consumes 3 uniforms per mode."""
    return uniforms_to_increments(cov, draw_uniforms(rng, 1, cov.n_modes)[0])
