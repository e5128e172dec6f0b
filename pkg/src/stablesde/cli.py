"""Command-line experiment runner.

Exit codes: 0 pass, 1 verdict failure (including a refused stability run),
2 invalid config, 3 runtime or I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, dump_config, load_config
from .density import (
    estimate_density,
    fit_bound_constant,
    stable_density_oracle,
    tail_exponent_estimate,
)
from .drift import Constant, Zero
from .errors import ConfigError, HypothesisRejected, ParameterError
from .lattice import lattice_check, lattice_trials, uniqueness_probe
from .noise import (
    LevyPath,
    PathGrid,
    char_exponent,
    derive_seed,
    empirical_char,
    simulate_path,
    write_path_csv,
)
from .parallel import WORKERS_ENV, map_chunks, resolve_workers
from .report import (
    DENSITY_COLUMNS,
    LATTICE_COLUMNS,
    PROBE_COLUMNS,
    STABILITY_COLUMNS,
    sha256_file,
    write_csv,
    write_text,
)
from .solver import SolutionPath, self_convergence_probe
from .stability import run_stability

log = logging.getLogger("stablesde")

EXIT_PASS, EXIT_VERDICT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

SUBCOMMANDS = {
    "simulate": "simulate",
    "lattice-check": "lattice",
    "uniqueness": "uniqueness",
    "stability": "stability",
    "density": "density",
}


@dataclass
class RunManifest:
    experiment: str
    config_digest: str
    version: str
    master_seed: int
    started: str
    finished: str
    verdict: bool
    checksums: dict

    def to_dict(self):
        return {"experiment": self.experiment, "config_digest": self.config_digest,
                "toolkit_version": self.version, "master_seed": self.master_seed,
                "started": self.started, "finished": self.finished,
                "verdict": "pass" if self.verdict else "fail", "checksums": self.checksums}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- runners: each returns (verdict, report lines) and writes its CSV files --

def _z_endpoint_chunk(lo, hi, params, grid, master_seed):
    return np.array([simulate_path(params, grid, derive_seed(master_seed, i)).values[-1] for i in range(lo, hi)])


def _run_simulate(p, seed, workers, out: Path):
    grid = PathGrid(p.T, p.n_steps)
    for i in range(p.dump_paths):
        write_path_csv(out / f"path_{i:04d}.csv", simulate_path(p.params, PathGrid(p.T, p.dump_steps),
                                                                derive_seed(seed, i)))
    samples = np.concatenate(map_chunks(_z_endpoint_chunk, p.n_paths, (p.params, grid, seed), workers,
                                        chunk=4096))
    tol = p.tolerance_factor / math.sqrt(p.n_paths)
    rows, ok = [], True
    for lam in p.lambdas:
        emp = empirical_char(samples, lam)
        exact = float(char_exponent(p.params, p.T, lam))
        passed = abs(emp - exact) <= tol
        ok &= passed
        rows.append({"lambda": lam, "empirical": emp, "exact": exact, "abs_error": abs(emp - exact),
                     "tolerance": tol, "verdict": passed})
    write_csv(out / "characteristic.csv", ["lambda", "empirical", "exact", "abs_error", "tolerance", "verdict"],
              rows)
    lines = [f"alpha={p.params.alpha:g} c={p.params.c:g} T={p.T:g} M={p.n_paths}"]
    lines += [f"lambda={r['lambda']:g}: |empirical - exact| = {r['abs_error']:.3g} (tol {tol:.3g})" for r in rows]
    return ok, lines


def _run_lattice(p, seed, workers, out: Path):
    if p.mode == "injected":
        grid = PathGrid(p.T, p.n_steps)
        t = grid.times
        sols = [SolutionPath.injected(np.polynomial.polynomial.polyval(t, c), p.T) for c in p.candidates]
        zero = LevyPath.from_values(np.zeros(p.n_steps + 1), p.T)
        rep = lattice_check(sols[0], sols[1], p.drift, zero, p.safety_factor)
        ok = rep.verdict
        lines = [f"tolerance {rep.tolerance_used:.6g}, crossings {rep.crossings}"]
        if p.residual_ceiling_dt is not None:
            ceiling = p.residual_ceiling_dt * grid.dt
            within = max(rep.residual_min, rep.residual_max) <= ceiling
            ok &= within
            lines.append(f"min/max residuals {rep.residual_min:.6g}, {rep.residual_max:.6g} "
                         f"vs ceiling {ceiling:.6g}: {'pass' if within else 'fail'}")
        rows = [{"trial": 0, "r1": rep.residual_in_1, "r2": rep.residual_in_2, "rmin": rep.residual_min,
                 "rmax": rep.residual_max, "verdict": rep.verdict}]
        write_csv(out / "lattice.csv", LATTICE_COLUMNS, rows)
        return ok, lines
    census = lattice_trials(p.x0, p.drift, p.drift_b, p.drift, p.params, p.T, p.n_steps, p.n_trials, seed,
                            p.safety_factor, workers)
    write_csv(out / "lattice.csv", LATTICE_COLUMNS, census.rows())
    frac = census.pass_fraction
    ok = frac >= p.required_pass_fraction
    return ok, [f"pass fraction {frac:.4f} over {p.n_trials} trials (required {p.required_pass_fraction:g})",
                f"max crossings {int(census.crossings.max()) if census.crossings.size else 0}"]


def _strictly_decreasing(v):
    return all(b < a for a, b in zip(v, v[1:]))


def _run_uniqueness(p, seed, workers, out: Path):
    probes = {"self_convergence": self_convergence_probe, "two_schemes": uniqueness_probe}
    ok, lines = True, []
    for name in p.probes:
        levels = probes[name](p.x0, p.drift, p.params, p.T, p.finest_n, p.levels, master_seed=seed,
                              n_paths=p.n_paths, workers=workers)
        write_csv(out / f"{name}.csv", PROBE_COLUMNS, [lv.row() for lv in levels])
        med = [lv.median for lv in levels]
        good = _strictly_decreasing(med)
        ok &= good
        lines.append(f"{name}: medians coarse->fine " + ", ".join(f"{m:.6g}" for m in med)
                     + f" -> {'strictly decreasing' if good else 'NOT strictly decreasing'}")
    return ok, lines


def _run_stability(p, seed, workers, out: Path):
    spec = p.spec(seed)
    try:
        rep = run_stability(spec, workers=workers)
    except HypothesisRejected as exc:
        write_csv(out / "stability.csv", STABILITY_COLUMNS, [])
        write_text(out / "hypotheses.txt", [f"{c.name}: {c.status} -- {c.detail}" for c in exc.checks])
        raise
    write_csv(out / "stability.csv", STABILITY_COLUMNS, [r.as_dict() for r in rep.rows])
    lines = [ln for ln in rep.text_lines() if not ln.startswith("verdict:")]
    lines.append(f"trend: {'pass' if rep.verdict else 'fail'}")
    ok = rep.verdict
    if p.closed_form:
        if p.drifts.family.get("kind") != "constant" or not isinstance(p.drifts.limit, Constant):
            raise ConfigError("closed_form", "closed-form check needs a constant drift family")
        worst = 0.0
        for j, n in enumerate(spec.indices):
            expect = abs(p.x_seq[n] - p.x_seq.limit) + abs(p.drifts[n].K - p.drifts.limit.K) * spec.T
            worst = max(worst, float(np.max(np.abs(rep.distances[:, j] - expect))) / expect)
        good = worst <= 5e-13
        ok = ok and good
        lines.append(f"closed form |x_n - x_0| + |K_n - K_0| T: worst relative error {worst:.3g} "
                     f"-> {'pass' if good else 'fail'}")
    write_text(out / "hypotheses.txt", [f"{c.name}: {c.status} -- {c.detail}" for c in rep.hypothesis_checks])
    return ok, lines


def _run_density(p, seed, workers, out: Path):
    y = np.linspace(*p.y_grid)
    alpha = p.params.alpha
    drift_free = isinstance(p.drift, Zero)
    summary, fits, ok, lines = [], [], True, []
    for i, t in enumerate(p.times):
        est = estimate_density(p.params, p.drift, p.x, t, p.M, y, p.bandwidth, seed, p.n_steps, workers)
        oracle = stable_density_oracle(p.params, t, y - p.x)
        fit = fit_bound_constant(est, alpha)
        fit_o = fit_bound_constant(est, alpha, p=oracle)
        env = fit.N_hat * t / (t + np.abs(p.x - y)) ** (alpha + 1)
        write_csv(out / f"density_{i}.csv", DENSITY_COLUMNS,
                  ({"y": a, "p_hat": b, "oracle_p": c, "bound_envelope": d}
                   for a, b, c, d in zip(y, est.p_hat, oracle, env)))
        linf = float(np.max(np.abs(est.p_hat - oracle)))
        tail = tail_exponent_estimate(est.samples - p.x, p.k_fraction)
        summary.append({"t": t, "M": p.M, "bandwidth": est.bandwidth, "mass": est.mass, "N_hat": fit.N_hat,
                        "argmax_y": fit.argmax_y, "N_hat_oracle": fit_o.N_hat, "linf_oracle": linf,
                        "tail_index": tail})
        fits.append(fit.N_hat)
        lines.append(f"t={t:g}: bandwidth {est.bandwidth:.4g}, mass {est.mass:.4g}, L-infinity to oracle "
                     f"{linf:.4g}, N_hat {fit.N_hat:.4g} (oracle {fit_o.N_hat:.4g}), tail index {tail:.4g}")
        if drift_free and p.linf_tol is not None and linf > p.linf_tol:
            ok = False
            lines.append(f"t={t:g}: L-infinity distance to oracle {linf:.4g} exceeds {p.linf_tol:g}")
        if abs(tail - alpha) > p.tail_tol:
            ok = False
            lines.append(f"t={t:g}: tail index {tail:.4g} differs from alpha by more than {p.tail_tol:g}")
        if not math.isfinite(fit.N_hat) or (p.n_hat_ceiling is not None and fit.N_hat > p.n_hat_ceiling):
            ok = False
            lines.append(f"t={t:g}: N_hat {fit.N_hat:.4g} not finite or above ceiling")
    ratio = max(fits) / min(fits) if min(fits) > 0 else math.inf
    if ratio > p.n_ratio_max:
        ok = False
    lines.append(f"N_hat across t: {', '.join(f'{v:.4g}' for v in fits)} (max/min {ratio:.3g}, "
                 f"allowed {p.n_ratio_max:g})")
    write_csv(out / "summary.csv", ["t", "M", "bandwidth", "mass", "N_hat", "argmax_y", "N_hat_oracle",
                                    "linf_oracle", "tail_index"], summary)
    return ok, lines


RUNNERS = {
    "simulate": _run_simulate,
    "lattice": _run_lattice,
    "uniqueness": _run_uniqueness,
    "stability": _run_stability,
    "density": _run_density,
}


def run_experiment(config: ExperimentConfig, seed: int | None = None, workers=None,
                   out: str | os.PathLike | None = None) -> RunManifest:
    """Execute ``config`` and write CSV results, ``report.txt`` and ``manifest.json``.

    ``seed``, ``workers`` and ``out`` override the config values. Raises
    :class:`ConfigError` for unusable configs and :class:`HypothesisRejected`
    when a stability run is refused.
    """
    seed = config.master_seed if seed is None else seed
    if seed is None:
        raise ConfigError("master_seed", "a master seed is required (config or --seed)")
    out = out if out is not None else config.output_dir
    if out is None:
        raise ConfigError("output_dir", "an output directory is required (config or --out)")
    try:
        workers = resolve_workers(workers if workers is not None else config.workers)
    except ParameterError as exc:
        raise ConfigError("workers", f"{exc} (check --workers, the config or ${WORKERS_ENV})") from exc
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    log.info("running %s (seed %d, %d workers) into %s", config.kind, seed, workers, out)
    verdict, lines = RUNNERS[config.kind](config.body, seed, workers, out)
    write_text(out / "config.yaml", dump_config(config).splitlines())
    write_text(out / "report.txt", [f"experiment: {config.kind}", f"master_seed: {seed}", *lines,
                                    f"verdict: {'pass' if verdict else 'fail'}"])
    checksums = {f.name: sha256_file(f) for f in sorted(out.iterdir())
                 if f.is_file() and f.name != "manifest.json"}
    manifest = RunManifest(config.kind, config.digest(), __version__, seed, started, _now(), verdict, checksums)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _seed_arg(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablesde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--seed", type=_seed_arg, help="master seed (overrides the config)")
        sp.add_argument("--workers", help=f"worker count or 'auto' (default: config, then ${WORKERS_ENV}, then 1)")
        sp.add_argument("--out", help="output directory (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if SUBCOMMANDS[args.command] != cfg.kind:
            raise ConfigError("experiment", f"config describes {cfg.kind!r}, not {args.command!r}")
        workers = args.workers
        if workers is not None and workers != "auto":
            try:
                workers = int(workers)
            except ValueError:
                raise ConfigError("--workers", f"expected an integer or 'auto', got {workers!r}") from None
        manifest = run_experiment(cfg, args.seed, workers, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisRejected as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except (OSError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{manifest.experiment}: {'pass' if manifest.verdict else 'fail'}")
    return EXIT_PASS if manifest.verdict else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
