"""Monte Carlo strong/weak error curves and log-log rate fits."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .dynamics import blocks, run_tasks, simulate_block
from .spectral import SpectralVector


class InsufficientData(ValueError):
    pass


FUNCTIONAL_KINDS = ("cos-pairing", "gauss-norm", "linear-pairing")


@dataclass(frozen=True)
class FunctionalSpec:
    """Test functional phi: H -> R.

    cos-pairing:    cos(<u, w>)
    gauss-norm:     exp(-|u|^2)
    linear-pairing: <u, w>   (unbounded; outside the smooth-bounded class)
    """

    kind: str
    w: tuple = ()

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        object.__setattr__(self, "w", tuple(float(x) for x in self.w))

    @property
    def eligible(self) -> bool:
        return self.kind != "linear-pairing"

    @property
    def label(self) -> str:
        tag = "" if self.eligible else " [outside hypotheses]"
        return f"{self.kind}{tag}"

    def weights(self, N: int) -> np.ndarray:
        w = np.zeros(N)
        w[:min(len(self.w), N)] = self.w[:N]
        return w


def functional_values(phi: FunctionalSpec, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if phi.kind == "gauss-norm":
        return np.exp(-np.sum(u * u, axis=-1))
    pairing = u @ phi.weights(u.shape[-1])
    return np.cos(pairing) if phi.kind == "cos-pairing" else pairing


def functional_eval(phi: FunctionalSpec, u: SpectralVector) -> float:
    return float(functional_values(phi, u.coeffs))


def functional_of(cfg: ExperimentConfig) -> FunctionalSpec:
    return FunctionalSpec(cfg.functional, cfg.functional_w)


# ---------------------------------------------------------------------------
# Replica observables

def observe_block(cfg, eps, start, count, phi, identical_dynamics=False):
    """Per-replica observables at the observation times, each (count, n_obs)."""
    ue, ve, uh = simulate_block(cfg, eps, start, count,
                                identical_dynamics=identical_dynamics)
    diff = ue - uh
    lam = (np.pi * np.arange(1, cfg.N + 1)) ** 2
    return {
        "dist": np.sqrt(np.sum(diff * diff, axis=-1)),
        "phi_eps": functional_values(phi, ue),
        "phi_heat": functional_values(phi, uh),
        "energy": np.sum(ue * ue, axis=-1) + np.sum(ve * ve / lam, axis=-1),
        "u_sq": np.sum(ue * ue, axis=-1),
    }


def sweep(cfg: ExperimentConfig, phi: FunctionalSpec | None = None, workers=None,
          identical_dynamics: bool = False):
    """Run every (eps, block) task and stitch replicas back in index order."""
    phi = phi or functional_of(cfg)
    parts = blocks(cfg.M)
    tasks = [(cfg, eps, s, c, phi, identical_dynamics)
             for eps in cfg.eps_list for s, c in parts]
    results = run_tasks(observe_block, tasks, workers)
    out = []
    for i, _ in enumerate(cfg.eps_list):
        chunk = results[i * len(parts):(i + 1) * len(parts)]
        out.append({k: np.concatenate([r[k] for r in chunk]) for k in chunk[0]})
    return out


# ---------------------------------------------------------------------------
# Curves

@dataclass(frozen=True)
class CurveEntry:
    eps: float
    error: float
    halfwidth: float
    n_samples: int
    noise_dominated: bool = False
    t_argmax: float = float("nan")


@dataclass
class ErrorCurve:
    kind: str
    entries: list
    digest: str = ""
    notes: list = field(default_factory=list)

    def __post_init__(self):
        eps = [e.eps for e in self.entries]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps must be strictly decreasing along a curve")

    @property
    def eps(self):
        return np.array([e.eps for e in self.entries])

    @property
    def errors(self):
        return np.array([e.error for e in self.entries])

    @property
    def halfwidths(self):
        return np.array([e.halfwidth for e in self.entries])


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    residual_norm: float
    n_points: int
    excluded: tuple = ()


def bootstrap_counts(M: int, B: int, rng, chunk: int = 100):
    """Yield (b, M) multinomial resample count matrices, B rows in total."""
    done = 0
    while done < B:
        b = min(chunk, B - done)
        idx = rng.integers(0, M, size=(b, M))
        flat = (idx + (np.arange(b) * M)[:, None]).ravel()
        yield np.bincount(flat, minlength=b * M).reshape(b, M).astype(float)
        done += b


def _bootstrap(values, statistic, B, rng):
    """Percentile 95% half-width of ``statistic(mean over replicas)``."""
    M = values.shape[0]
    stats_b = []
    for counts in bootstrap_counts(M, B, rng):
        stats_b.append(statistic(counts @ values / M))
    stats_b = np.concatenate(stats_b)
    lo, hi = np.percentile(stats_b, [2.5, 97.5])
    return 0.5 * (hi - lo)


def _boot_rng(cfg, kind, i):
    return np.random.default_rng([cfg.seed, kind, i])


def strong_curve(cfg: ExperimentConfig, observations, p: int | None = None) -> ErrorCurve:
    p = cfg.p if p is None else p
    if cfg.M < 2:
        raise InsufficientData("strong error needs at least 2 replicas")
    times = np.array(cfg.obs_times)
    entries = []
    for i, (eps, obs) in enumerate(zip(cfg.eps_list, observations)):
        dp = obs["dist"] ** p
        moments = dp.mean(axis=0)
        k = int(np.argmax(moments))
        error = float(moments[k] ** (1.0 / p))

        def stat(m):
            return np.max(m, axis=-1) ** (1.0 / p)

        hw = _bootstrap(dp, stat, cfg.bootstrap, _boot_rng(cfg, 1, i))
        entries.append(CurveEntry(float(eps), error, float(hw), dp.shape[0],
                                  False, float(times[k])))
    return ErrorCurve(f"strong(p={p})", entries, cfg.digest())


def weak_curve(cfg: ExperimentConfig, observations, phi: FunctionalSpec | None = None) -> ErrorCurve:
    phi = phi or functional_of(cfg)
    if cfg.M < 2:
        raise InsufficientData("weak error needs at least 2 replicas")
    notes = []
    if not phi.eligible:
        msg = f"functional {phi.kind} is outside the smooth bounded class; rate not covered by theory"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    times = np.array(cfg.obs_times)
    entries = []
    for i, (eps, obs) in enumerate(zip(cfg.eps_list, observations)):
        D = obs["phi_eps"] - obs["phi_heat"]
        means = D.mean(axis=0)
        k = int(np.argmax(np.abs(means)))
        error = float(abs(means[k]))
        hw = _bootstrap(D, lambda m: np.max(np.abs(m), axis=-1), cfg.bootstrap,
                        _boot_rng(cfg, 2, i))
        entries.append(CurveEntry(float(eps), error, float(hw), D.shape[0],
                                  bool(error < 2.0 * hw), float(times[k])))
    return ErrorCurve(f"weak({phi.label})", entries, cfg.digest(), notes)


def strong_error(cfg: ExperimentConfig, p: int | None = None, workers=None) -> ErrorCurve:
    return strong_curve(cfg, sweep(cfg, workers=workers), p)


def weak_error(cfg: ExperimentConfig, phi: FunctionalSpec | None = None, workers=None) -> ErrorCurve:
    phi = phi or functional_of(cfg)
    return weak_curve(cfg, sweep(cfg, phi, workers=workers), phi)


def fit_rate(curve: ErrorCurve, drop_noise_dominated: bool = True) -> RateFit:
    """Least squares of log(error) on log(eps); the slope is the empirical rate."""
    keep = []
    excluded = []
    for e in curve.entries:
        usable = e.error > 0 and np.isfinite(e.error)
        if drop_noise_dominated and e.noise_dominated:
            usable = False
        (keep if usable else excluded).append(e)
    if len(keep) < 3:
        raise InsufficientData(
            f"need at least 3 usable points for a rate fit, have {len(keep)}")
    x = np.log([e.eps for e in keep])
    y = np.log([e.error for e in keep])
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr),
                   float(np.linalg.norm(resid)), len(keep),
                   tuple(e.eps for e in excluded))


# ---------------------------------------------------------------------------
# CSV

CURVE_COLUMNS = ("type", "eps", "error", "ci_halfwidth", "n_samples", "noise_dominated")
FIT_COLUMNS = ("slope", "slope_stderr", "intercept")


def curve_to_csv(curve: ErrorCurve, fit: RateFit | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# digest={curve.digest}\n")
    for note in curve.notes:
        buf.write(f"# note: {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for e in curve.entries:
        w.writerow([curve.kind, repr(float(e.eps)), repr(float(e.error)),
                    repr(float(e.halfwidth)), int(e.n_samples), int(e.noise_dominated)])
    if fit is not None:
        w.writerow(FIT_COLUMNS)
        w.writerow([repr(float(fit.slope)), repr(float(fit.slope_stderr)),
                    repr(float(fit.intercept))])
    return buf.getvalue()


def read_curve_csv(text: str):
    """Parse curve CSV text back into (digest, rows, fit-or-None)."""
    lines = text.splitlines()
    digest = ""
    body = []
    for line in lines:
        if line.startswith("# digest="):
            digest = line.split("=", 1)[1].strip()
        elif not line.startswith("#"):
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != CURVE_COLUMNS:
        raise ValueError("not an error-curve CSV")
    data, fit = [], None
    i = 1
    while i < len(rows):
        if tuple(rows[i]) == FIT_COLUMNS:
            fit = dict(zip(FIT_COLUMNS, map(float, rows[i + 1])))
            break
        data.append(dict(zip(CURVE_COLUMNS, rows[i])))
        i += 1
    return digest, data, fit
