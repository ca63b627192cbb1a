"""Dirichlet sine eigenbasis on the unit interval.

The Laplacian with homogeneous Dirichlet conditions on (0, 1) has eigenpairs

    e_n(x) = sqrt(2) sin(n pi x),    lambda_n = (n pi)^2,    n = 1, 2, ...

Fields are carried as coefficient vectors in this basis. Nonlinear pointwise
maps are evaluated pseudo-spectrally on the interior nodes x_j = j / (J + 1),
j = 1..J, where the discrete sine transform is exact for the first J modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def eigenvalue(n: int) -> float:
    """Return lambda_n = (n pi)^2 for mode index n >= 1."""
    if int(n) != n or n < 1:
        raise ValueError(f"mode index must be a positive integer, got {n!r}")
    return float((n * np.pi) ** 2)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """First N eigenpairs. ``eigenvalues`` may be injected for testing."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).copy()
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-d array")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("eigenvalues must be finite and positive")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def dirichlet(cls, N: int) -> "SpectralBasis":
        if int(N) != N or N < 1:
            raise ValueError(f"dimension must be a positive integer, got {N!r}")
        return cls((np.pi * np.arange(1, N + 1)) ** 2)

    @property
    def dimension(self) -> int:
        return self.eigenvalues.size

    def __eq__(self, other):
        if not isinstance(other, SpectralBasis):
            return NotImplemented
        return self is other or np.array_equal(self.eigenvalues, other.eigenvalues)

    def __hash__(self):
        return hash(self.eigenvalues.tobytes())


@dataclass(frozen=True)
class SpectralVector:
    coeffs: np.ndarray
    basis: SpectralBasis

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.basis.dimension,):
            raise ValueError(
                f"expected {self.basis.dimension} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, basis: SpectralBasis) -> "SpectralVector":
        return cls(np.zeros(basis.dimension), basis)

    @classmethod
    def mode(cls, basis: SpectralBasis, n: int, value: float = 1.0) -> "SpectralVector":
        c = np.zeros(basis.dimension)
        c[n - 1] = value
        return cls(c, basis)


@dataclass(frozen=True)
class StateVector:
    """Damped-wave state (u, v); v is measured in H^{-1}-type units."""

    u: SpectralVector
    v: SpectralVector

    def __post_init__(self):
        if self.u.basis != self.v.basis:
            raise ValueError("u and v must share a basis")

    @property
    def basis(self) -> SpectralBasis:
        return self.u.basis


@dataclass(frozen=True)
class PhysicalField:
    samples: np.ndarray
    nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.array(self.samples, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("samples must be a nonempty 1-d array")
        w.setflags(write=False)
        object.__setattr__(self, "samples", w)
        object.__setattr__(self, "nodes", collocation_nodes(w.size))

    @property
    def size(self) -> int:
        return self.samples.size


def hs_norm_coeffs(c, lam, alpha: float):
    """sqrt(sum lam^alpha c^2) along the last axis; works on batches."""
    c = np.asarray(c, dtype=float)
    return np.sqrt(np.sum(np.asarray(lam) ** alpha * c * c, axis=-1))


def hs_norm(v: SpectralVector, alpha: float) -> float:
    """Norm in H^alpha; alpha may be negative on the truncated space."""
    return float(hs_norm_coeffs(v.coeffs, v.basis.eigenvalues, alpha))


def state_norm(x: StateVector, alpha: float) -> float:
    """Norm in H^alpha x H^{alpha-1}."""
    return float(np.hypot(hs_norm(x.u, alpha), hs_norm(x.v, alpha - 1)))


def project(v: SpectralVector, n_keep: int) -> SpectralVector:
    """Orthogonal projection onto the first ``n_keep`` modes (same basis)."""
    if int(n_keep) != n_keep or not 1 <= n_keep <= v.basis.dimension:
        raise ValueError(
            f"projection size must lie in [1, {v.basis.dimension}], got {n_keep!r}")
    c = np.array(v.coeffs)
    c[n_keep:] = 0.0
    return SpectralVector(c, v.basis)


def collocation_nodes(J: int) -> np.ndarray:
    return np.arange(1, J + 1) / (J + 1)


@lru_cache(maxsize=64)
def sine_matrix(N: int, J: int) -> np.ndarray:
    """(N, J) matrix of e_n(x_j); read-only so it can be shared."""
    n = np.arange(1, N + 1)[:, None]
    j = np.arange(1, J + 1)[None, :]
    S = np.sqrt(2.0) * np.sin(np.pi * n * j / (J + 1))
    S.setflags(write=False)
    return S


def synthesize_coeffs(c, J: int) -> np.ndarray:
    """Field samples at the J interior nodes from coefficients (batched)."""
    c = np.asarray(c, dtype=float)
    N = c.shape[-1]
    if J < N:
        raise ValueError(f"need J >= N for the transform pair, got J={J}, N={N}")
    return c @ sine_matrix(N, J)


def analyze_samples(w, N: int) -> np.ndarray:
    """First N coefficients of node samples (batched); exact for J >= N."""
    w = np.asarray(w, dtype=float)
    J = w.shape[-1]
    if J < N:
        raise ValueError(f"need J >= N for the transform pair, got J={J}, N={N}")
    # sum_j e_n(x_j) e_m(x_j) = (J + 1) delta_nm for n, m <= J
    return (w @ sine_matrix(N, J).T) / (J + 1)


def synthesize(v: SpectralVector, J: int) -> PhysicalField:
    return PhysicalField(synthesize_coeffs(v.coeffs, J))


def analyze(w: PhysicalField, basis: SpectralBasis | int) -> SpectralVector:
    if isinstance(basis, (int, np.integer)):
        basis = SpectralBasis.dirichlet(int(basis))
    return SpectralVector(analyze_samples(w.samples, basis.dimension), basis)
