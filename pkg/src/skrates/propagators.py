"""Per-mode heat and damped-wave propagators.

For a single mode with eigenvalue lam the damped-wave generator is

    d/dt (f, g) = (g / eps, -lam f / eps - g / eps^2),

whose flow e^{tA} is a 2x2 matrix [[f10, f01], [g10, g01]] (columns are the
solutions started from (1, 0) and (0, 1)).  Writing a = 1/(2 eps^2) and
kappa = (4 lam eps^2 - 1) / (4 eps^4), the flow is

    e^{-a t} [[C + a S, S / eps], [-lam S / eps, C - a S]]

with C = cos(sqrt(kappa) t), S = sin(sqrt(kappa) t) / sqrt(kappa), continued
analytically through kappa = 0 (critical damping) into cosh/sinh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .spectral import SpectralVector, StateVector

# |z| below which C and S/t are summed as Taylor series in z = kappa t^2
SERIES_Z = 1e-4


class QuadratureError(RuntimeError):
    pass


def heat_factor(lam, t):
    """e^{-lam t}."""
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("eigenvalue must be positive")
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = np.exp(-lam * t)
    return float(out) if out.ndim == 0 else out


def mode_entries(eps, lam, t):
    """Broadcasting kernel returning (f10, f01, g10, g01).

    Exponentials are combined before evaluation so that nothing overflows:
    in the overdamped branch the two real rates b - a and -(a + b) are used
    directly, with b - a = -2 lam / (1 + sqrt(1 - 4 lam eps^2)) to avoid
    cancellation.
    """
    eps, lam, t = np.broadcast_arrays(
        np.asarray(eps, dtype=float), np.asarray(lam, dtype=float),
        np.asarray(t, dtype=float))
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    if np.any(lam <= 0):
        raise ValueError("eigenvalue must be positive")
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")

    a = 0.5 / eps**2
    disc = 1.0 - 4.0 * lam * eps**2
    kappa = -disc / (4.0 * eps**4)
    z = kappa * t * t

    f10 = np.empty(eps.shape)
    f01 = np.empty(eps.shape)
    g10 = np.empty(eps.shape)
    g01 = np.empty(eps.shape)

    near = np.abs(z) < SERIES_Z
    osc = ~near & (z > 0)
    hyp = ~near & (z < 0)

    with np.errstate(under="ignore", over="ignore"):
        if np.any(near):
            zz, tt, aa = z[near], t[near], a[near]
            c = 1 - zz / 2 * (1 - zz / 12 * (1 - zz / 30 * (1 - zz / 56)))
            s = tt * (1 - zz / 6 * (1 - zz / 20 * (1 - zz / 42 * (1 - zz / 72))))
            _fill(near, np.exp(-aa * tt), c, s, aa, eps[near], lam[near],
                  f10, f01, g10, g01)
        if np.any(osc):
            w = np.sqrt(kappa[osc])
            tt, aa = t[osc], a[osc]
            _fill(osc, np.exp(-aa * tt), np.cos(w * tt), np.sin(w * tt) / w, aa,
                  eps[osc], lam[osc], f10, f01, g10, g01)
        if np.any(hyp):
            tt, aa, e, lm = t[hyp], a[hyp], eps[hyp], lam[hyp]
            root = np.sqrt(disc[hyp])
            b = root * aa
            slow = -2.0 * lm / (1.0 + root)      # b - a
            fast = -(aa + b)
            P = np.exp(slow * tt)
            Q = np.exp(fast * tt)
            f10[hyp] = (P * (b + aa) + Q * slow) / (2 * b)
            g01[hyp] = (P * slow + Q * (b + aa)) / (2 * b)
            d = (P - Q) / (2 * b)
            f01[hyp] = d / e
            g10[hyp] = -lm * d / e
    return f10, f01, g10, g01


def _fill(mask, decay, c, s, a, eps, lam, f10, f01, g10, g01):
    ec = decay * c
    es = decay * s
    f10[mask] = ec + a * es
    f01[mask] = es / eps
    g10[mask] = -lam * es / eps
    g01[mask] = ec - a * es


@dataclass(frozen=True)
class ModeMatrix:
    f10: float
    f01: float
    g10: float
    g01: float
    eps: float
    lam: float
    t: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.f10, self.f01], [self.g10, self.g01]])

    @property
    def regime(self) -> str:
        return regime(self.eps, self.lam)


def regime(eps: float, lam: float) -> str:
    disc = 1.0 - 4.0 * lam * eps**2
    if disc < 0:
        return "oscillatory"
    return "critical" if disc == 0 else "overdamped"


def wave_mode_matrix(eps: float, lam: float, t: float) -> ModeMatrix:
    entries = mode_entries(eps, lam, t)
    return ModeMatrix(*(float(x) for x in entries), eps=float(eps),
                      lam=float(lam), t=float(t))


def apply_wave_semigroup(x: StateVector, eps: float, t: float) -> StateVector:
    lam = x.basis.eigenvalues
    f10, f01, g10, g01 = mode_entries(eps, lam, t)
    u, v = x.u.coeffs, x.v.coeffs
    return StateVector(SpectralVector(f10 * u + f01 * v, x.basis),
                       SpectralVector(g10 * u + g01 * v, x.basis))


# ---------------------------------------------------------------------------
# Quadrature of smooth integrands on [0, h]

_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = leggauss(_GL_ORDER)


def integrate(func, h, *, rtol=1e-12, max_level=14):
    """Integrate ``func(s)`` over [0, h] for every column of its output.

    ``func`` maps an array of nodes of shape (P,) to values of shape
    (P, ...).  Composite 20-point Gauss-Legendre on 2^k equal panels,
    doubling until two successive levels agree to ``rtol`` relative to the
    integral of |func|.  Raises QuadratureError otherwise.
    """
    prev = None
    for level in range(max_level + 1):
        panels = 2**level
        width = h / panels
        left = np.arange(panels) * width
        nodes = (left[:, None] + 0.5 * width * (_GL_NODES + 1.0)[None, :]).ravel()
        vals = np.asarray(func(nodes), dtype=float)
        w = np.tile(_GL_WEIGHTS, panels) * (0.5 * width)
        w = w.reshape((-1,) + (1,) * (vals.ndim - 1))
        cur = np.sum(vals * w, axis=0)
        scale = np.sum(np.abs(vals) * w, axis=0)
        if prev is not None and level >= 2:
            err = np.abs(cur - prev)
            if np.all(err <= rtol * scale + 1e-300):
                return cur
        prev = cur
    raise QuadratureError(
        f"quadrature did not reach rtol={rtol} with {2**max_level} panels on [0, {h}]")


@dataclass(frozen=True)
class ForcingWeights:
    wf: np.ndarray
    wg: np.ndarray
    wh: np.ndarray
    eps: float
    h: float
    lam: np.ndarray = field(repr=False)


def forcing_weights(eps: float, lam, h: float) -> ForcingWeights:
    """Exponential-Euler weights for a forcing frozen over one step.

    wf, wg = (1/eps) int_0^h (f01, g01)(s) ds   (damped wave)
    wh     = int_0^h e^{-lam s} ds              (heat)
    """
    if h <= 0:
        raise ValueError("step must be positive")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    wf, wg = _forcing_cached(float(eps), float(h), lam.tobytes())
    wh = -np.expm1(-lam * h) / lam
    return ForcingWeights(wf.copy(), wg.copy(), wh, float(eps), float(h), lam)


@lru_cache(maxsize=256)
def _forcing_cached(eps, h, lam_bytes):
    lam = np.frombuffer(lam_bytes)

    def integrand(s):
        _, f01, _, g01 = mode_entries(eps, lam[None, :], s[:, None])
        return np.stack([f01, g01], axis=-1) / eps

    out = integrate(integrand, h)
    out.setflags(write=False)
    return out[:, 0], out[:, 1]


# ---------------------------------------------------------------------------
# Numerical verifiers for the per-mode semigroup bounds

LEMMAS = ("contraction", "smoothing-wave", "smoothing-u", "mode-bounds",
          "mode-bounds-oscillatory", "mode-bounds-overdamped",
          "convergence-u", "convergence-v")

# numeric aliases accepted on the command line
LEMMA_ALIASES = {"4.1": "contraction", "4.2": "smoothing-wave", "4.3": "smoothing-u",
                 "4.5": "mode-bounds", "4.6": "convergence-u"}

# beyond this t/eps^2 the factors e^{-t/(c eps^2)} underflow and ratios become 0/0
MAX_T_OVER_EPS2 = 700.0


def resolve_lemma(name: str) -> str:
    name = LEMMA_ALIASES.get(str(name), str(name))
    if name not in LEMMAS:
        raise ValueError(f"unknown lemma {name!r}; expected one of "
                         f"{LEMMAS + tuple(LEMMA_ALIASES)}")
    return name


@dataclass(frozen=True)
class LemmaGrid:
    eps: np.ndarray
    lam: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        for name in ("eps", "lam", "t"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if arr.size == 0:
                raise ValueError(f"grid axis {name} is empty")
            if np.any(arr <= 0):
                raise ValueError(f"grid axis {name} must be positive")
            object.__setattr__(self, name, np.unique(arr))

    @classmethod
    def default(cls, eps=None, N=64, t_range=(0.01, 1.0), n_t=25):
        if eps is None:
            eps = 2.0 ** -np.arange(1, 11)
        lam = (np.pi * np.arange(1, N + 1)) ** 2
        return cls(np.asarray(eps), lam, np.geomspace(*t_range, n_t))

    def refined(self) -> "LemmaGrid":
        """Insert geometric midpoints along the eps and t axes."""
        def mid(a):
            if a.size < 2:
                return a
            return np.concatenate([a, np.sqrt(a[1:] * a[:-1])])
        return LemmaGrid(mid(self.eps), self.lam, mid(self.t))


@dataclass(frozen=True)
class BoundReport:
    lemma: str
    max_ratio: float
    location: tuple         # (eps, lam, t) of the maximum
    refined_max: float
    n_points: int
    params: dict

    @property
    def stable(self) -> bool:
        """Fitted constant moves by less than 10% under grid refinement."""
        if self.max_ratio == 0:
            return self.refined_max == 0
        return abs(self.refined_max - self.max_ratio) <= 0.1 * self.max_ratio


def _check_range(lemma, alpha, delta, rho):
    def need(cond, msg):
        if not cond:
            raise ValueError(f"{lemma}: {msg}")
    if lemma == "smoothing-wave":
        need(0 <= delta <= 0.5, "delta must lie in [0, 1/2]")
        need(2 * delta <= rho <= 1, "rho must lie in [2 delta, 1]")
    elif lemma in ("smoothing-u", "convergence-u"):
        need(0 <= alpha <= 1, "alpha must lie in [0, 1]")
        need(0 <= delta <= alpha / 2, "delta must lie in [0, alpha/2]")
    elif lemma == "convergence-v":
        need(0 <= alpha <= 1, "alpha must lie in [0, 1]")
        need(alpha / 2 <= delta <= 0.5, "delta must lie in [alpha/2, 1/2]")


def _ratios(lemma, eps, lam, t, alpha, delta, rho):
    f10, f01, g10, g01 = mode_entries(eps, lam, t)
    valid = np.ones(eps.shape, dtype=bool)
    if lemma == "contraction":
        # operator norm in coordinates where the H^alpha x H^(alpha-1) norm is Euclidean
        r = np.sqrt(lam)
        m = np.stack([np.stack([f10, f01 * r], -1), np.stack([g10 / r, g01], -1)], -2)
        return np.linalg.norm(m, ord=2, axis=(-2, -1)), valid
    if lemma == "convergence-u":
        return lam ** ((2 * delta - alpha) / 2) * np.abs(f10 - np.exp(-lam * t)) \
            / (t ** -delta * eps ** alpha), valid
    if lemma == "convergence-v":
        return lam ** ((2 * delta - alpha) / 2) * np.abs(f01 / eps - np.exp(-lam * t)) \
            / (t ** -delta * eps ** alpha), valid
    if lemma == "smoothing-u":
        return np.abs(f01) * lam ** ((1 + 2 * delta - alpha) / 2) \
            / (eps ** alpha * t ** -delta), valid

    valid = t / eps**2 <= MAX_T_OVER_EPS2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if lemma == "smoothing-wave":
            shape = t ** -delta * eps ** rho * (1 + eps ** (2 * delta - rho) * np.exp(-t / (2 * eps**2)))
            out = np.sqrt(lam * f01**2 + g01**2) * lam ** ((2 * delta - rho) / 2) / shape
            return out, valid
        osc = 1 - 4 * lam * eps**2 < 0
        decay = np.exp(t / (4 * eps**2))
        r_osc = np.maximum.reduce([np.abs(f01) * np.sqrt(lam), np.abs(g01), np.abs(f10)]) * decay
        el = np.exp(-lam * t)
        r_over = np.maximum.reduce([np.abs(f01) / (eps * el),
                                    np.abs(g01) / (np.exp(-t / eps**2) + lam * eps**2 * el),
                                    np.abs(f10) / el])
    if lemma == "mode-bounds-oscillatory":
        return r_osc, valid & osc
    if lemma == "mode-bounds-overdamped":
        return r_over, valid & ~osc
    return np.where(osc, r_osc, r_over), valid


def _scan(lemma, grid, alpha, delta, rho):
    eps, lam, t = np.meshgrid(grid.eps, grid.lam, grid.t, indexing="ij")
    ratio, valid = _ratios(lemma, eps, lam, t, alpha, delta, rho)
    valid = valid & np.isfinite(ratio)
    if not np.any(valid):
        raise ValueError(f"{lemma}: no grid point inside the lemma's range")
    masked = np.where(valid, ratio, -np.inf)
    i = np.unravel_index(int(np.argmax(masked)), masked.shape)
    return float(masked[i]), (float(eps[i]), float(lam[i]), float(t[i])), int(valid.sum())


def lemma_bound_ratio(lemma: str, grid: LemmaGrid | None = None, *, alpha: float = 1.0,
                      delta: float = 0.0, rho: float = 1.0) -> BoundReport:
    """Sup over the grid of (per-mode quantity) / (bound shape without constant).

    The maximum is the fitted constant; it is reported, not asserted, except
    for the contraction where the constant is 1.  The scan is repeated on a
    refined grid so that callers can check the constant has settled.
    """
    lemma = resolve_lemma(lemma)
    _check_range(lemma, alpha, delta, rho)
    grid = grid or LemmaGrid.default()
    top, loc, n = _scan(lemma, grid, alpha, delta, rho)
    refined, _, _ = _scan(lemma, grid.refined(), alpha, delta, rho)
    return BoundReport(lemma, top, loc, refined, n,
                       {"alpha": alpha, "delta": delta, "rho": rho})
