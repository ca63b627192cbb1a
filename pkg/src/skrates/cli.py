"""Command line entry point: ``skrates <subcommand> --config PATH``.

Exit codes: 0 success, 2 invalid input (config, arguments, digest
mismatch), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (InsufficientData, curve_to_csv, fit_rate, functional_of,
                       strong_error, weak_error)
from .config import ConfigError, ExperimentConfig, parse_config, validate
from .dynamics import NumericalFailure, resolve_workers, simulate_coupled
from .noise import FactorizationError, make_spectrum
from .propagators import (LemmaGrid, QuadratureError, lemma_bound_ratio,
                          mode_entries, resolve_lemma)

SUBCOMMANDS = ("simulate", "strong-rate", "weak-rate", "lemma-check", "propagator-table")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

# contraction constant is exactly 1; allow accumulated roundoff only
CONTRACTION_SLACK = 1e-12


@dataclass
class RunManifest:
    config: dict
    version: str
    digest: str
    subcommand: str
    wall_clock_s: float
    workers: int
    outputs: list

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skrates",
                description="Damped-wave vs heat SPDE convergence-rate experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, default=None,
                   help="key = value config file (defaults apply when omitted)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (falls back to SKRATES_WORKERS, then 1)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    p.add_argument("--check-digest", action="store_true",
                   help="verify that existing outputs in --out carry this config's digest")
    p.add_argument("--lemma", default=None, help="lemma id or alias, overrides the config")
    p.add_argument("--version", action="version", version=f"skrates {__version__}")
    return p


# ---------------------------------------------------------------------------
# Output helpers

def _csv_text(digest, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# digest={digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _write(out: Path, name: str, text: str, written: list):
    path = out / name
    path.write_text(text)
    written.append(name)
    return path


def output_names(sub: str, cfg: ExperimentConfig) -> list:
    if sub == "simulate":
        return [f"simulate_eps{i}.csv" for i in range(len(cfg.eps_list))]
    stem = sub.replace("-", "_")
    return [f"{stem}.csv", f"{stem}_report.txt"]


def embedded_digest(text: str) -> str | None:
    for line in text.splitlines():
        if line.startswith("# digest="):
            return line.split("=", 1)[1].strip()
        if line.startswith("digest:"):
            return line.split(":", 1)[1].strip()
    return None


def check_digest(sub: str, cfg: ExperimentConfig, out: Path) -> int:
    digest = cfg.digest()
    ok = True
    for name in output_names(sub, cfg):
        path = out / name
        if not path.exists():
            print(f"missing  {name}")
            ok = False
            continue
        found = embedded_digest(path.read_text())
        status = "ok" if found == digest else f"MISMATCH (file {found})"
        ok &= found == digest
        print(f"{status:8s} {name}")
    print(f"config digest {digest}: {'verified' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_INVALID


def _gnuplot(csv_name: str, title: str, predicted: float | None) -> str:
    lines = [
        "# plot error versus eps on log-log axes",
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'eps'",
        "set ylabel 'error'",
        "set key left top",
        f"set title '{title}'",
    ]
    plot = (f"plot '{csv_name}' every ::1 using 2:3:4 with yerrorbars title 'MC error', "
            f"'' every ::1 using 2:3 with lines notitle")
    if predicted is not None:
        lines.append("stats '" + csv_name + "' every ::1::1 using 2:3 nooutput name 'A'")
        plot += f", A_max_y*(x/A_max_x)**{predicted:g} with lines dt 2 title 'eps^{predicted:g}'"
    lines.append(plot)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands

def cmd_simulate(cfg, args, written):
    header = ("t", "mode", "u_eps", "v_eps", "u_heat")
    for i, eps in enumerate(cfg.eps_list):
        rec = simulate_coupled(cfg, eps, cfg.replica)
        _write(args.out, f"simulate_eps{i}.csv",
               _csv_text(cfg.digest(), header, rec.rows()), written)
        print(f"eps={eps:g}: replica {cfg.replica}, {cfg.n_obs} snapshots x {cfg.N} modes")


def _rate_report(cfg, curve, fit, predicted, label, fit_error=None) -> str:
    lines = [f"digest: {cfg.digest()}", f"{label} error curve ({curve.kind})",
             f"{'eps':>12s} {'error':>12s} {'halfwidth':>12s} {'t_argmax':>9s}  flag"]
    for e in curve.entries:
        flag = "noise-dominated" if e.noise_dominated else ""
        lines.append(f"{e.eps:12.6g} {e.error:12.6g} {e.halfwidth:12.6g} {e.t_argmax:9.4g}  {flag}")
    lines.extend(f"note: {n}" for n in curve.notes)
    if fit is None:
        lines.append(f"rate not fitted: {fit_error}")
    else:
        lines.append(f"fitted slope   {fit.slope:.4f} +/- {fit.slope_stderr:.4f} "
                     f"({fit.n_points} points, residual {fit.residual_norm:.3g})")
        if fit.excluded:
            lines.append("excluded eps   " + ", ".join(f"{e:g}" for e in fit.excluded))
    lines.append(f"predicted rate {predicted:g}")
    return "\n".join(lines) + "\n"


def _rate_command(cfg, args, written, kind):
    beta = make_spectrum(cfg.noise, cfg.N, cfg.noise_gamma).beta
    if kind == "strong":
        curve = strong_error(cfg, workers=args.workers)
        predicted = beta
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            curve = weak_error(cfg, functional_of(cfg), workers=args.workers)
        predicted = min(2 * beta, 1.0)
    try:
        fit, why = fit_rate(curve, drop_noise_dominated=True), None
    except InsufficientData as exc:
        fit, why = None, str(exc)
    stem = f"{kind}_rate"
    _write(args.out, f"{stem}.csv", curve_to_csv(curve, fit), written)
    report = _rate_report(cfg, curve, fit, predicted, kind, why)
    _write(args.out, f"{stem}_report.txt", report, written)
    if args.gnuplot:
        _write(args.out, f"{stem}.gp", _gnuplot(f"{stem}.csv", curve.kind, predicted), written)
    print(report, end="")


def cmd_lemma_check(cfg, args, written):
    lemma = resolve_lemma(args.lemma or cfg.lemma)
    grid = LemmaGrid.default(eps=cfg.eps_list, N=cfg.N)
    rep = lemma_bound_ratio(lemma, grid, alpha=cfg.lemma_alpha,
                            delta=cfg.lemma_delta, rho=cfg.lemma_rho)
    eps, lam, t = rep.location
    header = ("lemma", "alpha", "delta", "rho", "max_ratio", "eps", "lambda", "t",
              "refined_max", "stable")
    row = (lemma, float(cfg.lemma_alpha), float(cfg.lemma_delta), float(cfg.lemma_rho),
           rep.max_ratio, eps, lam, t, rep.refined_max, int(rep.stable))
    _write(args.out, "lemma_check.csv", _csv_text(cfg.digest(), header, [row]), written)
    lines = [f"digest: {cfg.digest()}", f"lemma {lemma} over {rep.n_points} grid points",
             f"max ratio {rep.max_ratio:.6g} at eps={eps:g}, lambda={lam:.6g}, t={t:.4g}",
             f"refined max {rep.refined_max:.6g} ({'stable' if rep.stable else 'NOT stable'} within 10%)"]
    if lemma == "contraction":
        ok = rep.max_ratio <= 1 + CONTRACTION_SLACK
        lines.append("max ratio <= 1" if ok else "max ratio > 1: contraction VIOLATED")
    else:
        lines.append(f"fitted constant {rep.max_ratio:.6g} (reported, not asserted)")
    report = "\n".join(lines) + "\n"
    _write(args.out, "lemma_check_report.txt", report, written)
    print(report, end="")


def cmd_propagator_table(cfg, args, written):
    lam = (np.pi * np.arange(1, cfg.N + 1)) ** 2
    times = np.array(cfg.obs_times)
    rows = []
    for eps in cfg.eps_list:
        E, L, T = np.meshgrid([eps], lam, times, indexing="ij")
        f10, f01, g10, g01 = mode_entries(E, L, T)
        for idx in np.ndindex(E.shape):
            rows.append((E[idx], L[idx], T[idx], f10[idx], f01[idx], g10[idx], g01[idx]))
    header = ("eps", "lambda", "t", "f10", "f01", "g10", "g01")
    _write(args.out, "propagator_table.csv", _csv_text(cfg.digest(), header, rows), written)
    report = (f"digest: {cfg.digest()}\npropagator table: {len(rows)} rows "
              f"({len(cfg.eps_list)} eps x {cfg.N} modes x {cfg.n_obs} times)\n")
    _write(args.out, "propagator_table_report.txt", report, written)
    print(report, end="")


COMMANDS = {
    "simulate": cmd_simulate,
    "strong-rate": lambda c, a, w: _rate_command(c, a, w, "strong"),
    "weak-rate": lambda c, a, w: _rate_command(c, a, w, "weak"),
    "lemma-check": cmd_lemma_check,
    "propagator-table": cmd_propagator_table,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else validate(ExperimentConfig())
        if args.lemma is not None:
            resolve_lemma(args.lemma)
        workers = resolve_workers(args.workers)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"skrates: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    args.workers = workers

    if args.check_digest:
        return check_digest(args.subcommand, cfg, args.out)

    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    start = time.perf_counter()
    try:
        COMMANDS[args.subcommand](cfg, args, written)
    except (NumericalFailure, FactorizationError, QuadratureError, FloatingPointError) as exc:
        print(f"skrates: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as exc:
        print(f"skrates: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    manifest = RunManifest(cfg.canonical(), __version__, cfg.digest(), args.subcommand,
                           round(time.perf_counter() - start, 3), workers, written)
    stem = args.subcommand.replace("-", "_")
    (args.out / f"{stem}_manifest.json").write_text(manifest.to_json())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
