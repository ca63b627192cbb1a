"""Coupled exponential-Euler stepping of the Galerkin wave and heat systems.

Both systems are advanced on the same step grid with the same per-mode
Brownian increments.  The linear parts are propagated exactly; the
nonlinearity is frozen at the left end of each step, so with f = 0 the scheme
is exact in law.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import ExperimentConfig
from .noise import (IncrementCovariance, draw_uniforms, joint_increment_cov,
                    make_spectrum, replica_stream, uniforms_to_increments)
from .propagators import forcing_weights, mode_entries
from .spectral import (SpectralBasis, SpectralVector, StateVector,
                       analyze_samples, synthesize_coeffs)

# replicas per task; fixed so results never depend on the worker count
BLOCK = 250
# steps of uniforms drawn per stream refill
CHUNK = 64


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str = "zero"
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "sine"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")

    @property
    def lipschitz(self) -> float:
        return 0.0 if self.kind == "zero" else abs(self.c)


def nonlinearity_values(spec: NonlinearitySpec, u: np.ndarray) -> np.ndarray:
    """Galerkin nonlinearity P_N f(u) on coefficient arrays (..., N)."""
    if spec.kind == "zero":
        return np.zeros_like(u)
    if spec.kind == "linear":
        return spec.c * u
    N = u.shape[-1]
    # J = 4N collocation nodes; aliasing of sin(u) is accepted
    field = synthesize_coeffs(u, 4 * N)
    return analyze_samples(spec.c * np.sin(field), N)


def nonlinearity_apply(spec: NonlinearitySpec, u: SpectralVector) -> SpectralVector:
    return SpectralVector(nonlinearity_values(spec, u.coeffs), u.basis)


@dataclass(frozen=True)
class StepTables:
    eps: float
    h: float
    basis: SpectralBasis
    f10: np.ndarray
    f01: np.ndarray
    g10: np.ndarray
    g01: np.ndarray
    wf: np.ndarray
    wg: np.ndarray
    wh: np.ndarray
    heat: np.ndarray
    cov: IncrementCovariance


def build_tables(eps: float, h: float, basis: SpectralBasis, q) -> StepTables:
    lam = basis.eigenvalues
    f10, f01, g10, g01 = mode_entries(eps, lam, h)
    w = forcing_weights(eps, lam, h)
    cov = joint_increment_cov(eps, lam, q, h)
    return StepTables(float(eps), float(h), basis, f10, f01, g10, g01,
                      w.wf, w.wg, w.wh, np.exp(-lam * h), cov)


@lru_cache(maxsize=32)
def _tables_for(eps, h, N, noise, gamma):
    basis = SpectralBasis.dirichlet(N)
    return build_tables(eps, h, basis, make_spectrum(noise, N, gamma).q)


def tables_for(cfg: ExperimentConfig, eps: float, h: float | None = None) -> StepTables:
    return _tables_for(float(eps), float(cfg.h if h is None else h), cfg.N,
                       cfg.noise, cfg.noise_gamma)


def wave_update(u, v, fu, xi_u, xi_v, tab: StepTables):
    """One exponential-Euler step of the wave system on arrays (..., N)."""
    u_new = tab.f10 * u + tab.f01 * v + tab.wf * fu + xi_u
    v_new = tab.g10 * u + tab.g01 * v + tab.wg * fu + xi_v
    return u_new, v_new


def heat_update(u, fu, eta, tab: StepTables):
    return tab.heat * u + tab.wh * fu + eta


def step_wave(x: StateVector, tab: StepTables, spec: NonlinearitySpec,
              increments) -> StateVector:
    """Advance (u, v) by one step; ``increments`` is the (N, 3) noise triple."""
    inc = np.asarray(increments)
    fu = nonlinearity_values(spec, x.u.coeffs)
    u, v = wave_update(x.u.coeffs, x.v.coeffs, fu, inc[:, 0], inc[:, 1], tab)
    return StateVector(SpectralVector(u, x.basis), SpectralVector(v, x.basis))


def step_heat(u: SpectralVector, tab: StepTables, spec: NonlinearitySpec,
              increments) -> SpectralVector:
    inc = np.asarray(increments)
    fu = nonlinearity_values(spec, u.coeffs)
    return SpectralVector(heat_update(u.coeffs, fu, inc[:, 2], tab), u.basis)


def initial_coeffs(cfg: ExperimentConfig):
    u0 = np.zeros(cfg.N)
    v0 = np.zeros(cfg.N)
    u0[:len(cfg.u0)] = cfg.u0
    v0[:len(cfg.v0)] = cfg.v0
    return u0, v0


def nonlinearity_of(cfg: ExperimentConfig) -> NonlinearitySpec:
    return NonlinearitySpec(cfg.nonlinearity, cfg.nonlinearity_c)


def simulate_block(cfg: ExperimentConfig, eps: float, start: int, count: int, *,
                   identical_dynamics: bool = False):
    """Simulate replicas start..start+count-1 at one eps.

    Returns arrays of shape (count, n_obs, N): u_eps, v_eps, u_heat at the
    observation times.  ``identical_dynamics`` steps the wave coordinate with
    the heat scheme instead (test hook; the strong error must then vanish).
    """
    tab = tables_for(cfg, eps)
    spec = nonlinearity_of(cfg)
    u0, v0 = initial_coeffs(cfg)
    N = cfg.N
    ue = np.tile(u0, (count, 1))
    ve = np.tile(v0, (count, 1))
    uh = ue.copy()
    streams = [replica_stream(cfg.seed, r) for r in range(start, start + count)]
    out = np.empty((3, count, cfg.n_obs, N))
    with np.errstate(over="ignore", invalid="ignore"):
        _advance(cfg, eps, start, count, tab, spec, streams, out, identical_dynamics, ue, ve, uh)
    return out[0], out[1], out[2]


def _advance(cfg, eps, start, count, tab, spec, streams, out, identical_dynamics, ue, ve, uh):
    """Time loop of simulate_block; blow-ups are caught once per chunk."""
    N = cfg.N
    stride = cfg.obs_stride
    step = 0
    while step < cfg.steps:
        n = min(CHUNK, cfg.steps - step)
        U = np.stack([draw_uniforms(g, n, N) for g in streams], axis=1)
        inc = uniforms_to_increments(tab.cov, U)        # (n, count, N, 3)
        for k in range(n):
            fh = nonlinearity_values(spec, uh)
            if identical_dynamics:
                ue = heat_update(ue, nonlinearity_values(spec, ue), inc[k, :, :, 2], tab)
            else:
                fe = nonlinearity_values(spec, ue)
                ue, ve = wave_update(ue, ve, fe, inc[k, :, :, 0], inc[k, :, :, 1], tab)
            uh = heat_update(uh, fh, inc[k, :, :, 2], tab)
            step += 1
            if step % stride == 0:
                j = step // stride - 1
                out[0, :, j] = ue
                out[1, :, j] = ve
                out[2, :, j] = uh
        if not (np.all(np.isfinite(ue)) and np.all(np.isfinite(ve))
                and np.all(np.isfinite(uh))):
            bad = start + int(np.argmax(~np.all(np.isfinite(ue) & np.isfinite(uh), axis=1)))
            raise NumericalFailure(
                f"non-finite state in replica {bad} at eps={eps} before t={step * cfg.h:g}; "
                "h is too large for the Lipschitz constant")


@dataclass(frozen=True)
class PathRecord:
    times: np.ndarray
    u_eps: np.ndarray      # (n_obs, N)
    v_eps: np.ndarray
    u_heat: np.ndarray
    eps: float
    N: int
    h: float
    seed: int
    replica: int

    def rows(self):
        for k, t in enumerate(self.times):
            for n in range(self.N):
                yield (t, n + 1, self.u_eps[k, n], self.v_eps[k, n], self.u_heat[k, n])


def simulate_coupled(cfg: ExperimentConfig, eps: float, replica: int) -> PathRecord:
    """Single coupled path; identical to the same replica inside any block."""
    ue, ve, uh = simulate_block(cfg, eps, replica, 1)
    return PathRecord(np.array(cfg.obs_times), ue[0], ve[0], uh[0], float(eps),
                      cfg.N, cfg.h, cfg.seed, replica)


# ---------------------------------------------------------------------------
# Replica fan-out

def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("SKRATES_WORKERS", "1"))
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def blocks(M: int):
    return [(s, min(BLOCK, M - s)) for s in range(0, M, BLOCK)]


def run_tasks(func, tasks, workers: int | None = None):
    """Evaluate ``func(*task)`` for every task, results in task order."""
    workers = resolve_workers(workers)
    if workers == 1 or len(tasks) <= 1:
        return [func(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, *t) for t in tasks]
        return [f.result() for f in futures]
