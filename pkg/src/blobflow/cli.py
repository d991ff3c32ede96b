"""Command-line front end: ``blobflow {simulate,convergence,validate,jko,gibbs}``.

Exit codes: 0 ok, 1 validation failure, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_config
from .dynamics import REPORT_COLUMNS, SupportBoundWarning, simulate
from .energy import MixtureDensity
from .errors import (BlowUpError, ConfigError, ConvergenceError, CoverageError, EvaluationError,
                     InvalidParameterError)
from .metrics import quantization_floor, rate_fit, w2_1d, w2_particles_vs_density_1d
from .reference import (GridDensity1D, JKOEnergy, QuantileDiscretization, barenblatt_grid, gibbs_density,
                        heat_exact, jko_solve, ou_exact)
from .studies import run_checkpoints
from .svg import histogram_plot, line_plot, write_svg
from .validation import VALIDATION_COLUMNS, ValidationSettings, run_validation

log = logging.getLogger("blobflow")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
COMMANDS = ("simulate", "convergence", "validate", "jko", "gibbs")


# -- output helpers -------------------------------------------------------------

def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _prepare_out(cfg: RunConfig, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "resolved_config.ini"), "w") as fh:
        fh.write(cfg.resolved_text())
    with open(os.path.join(out, "VERSION"), "w") as fh:
        fh.write(f"blobflow {__version__}\n")


def _position_header(dim: int):
    return [f"x{a}" for a in range(dim)]


def _write_states(path: str, states) -> None:
    dim = states[0].dim
    rows = ([s.time, i, *s.positions[i]] for s in states for i in range(s.N))
    _write_csv(path, ["t", "particle_id", *_position_header(dim)], rows)


def _density_plot(state, spec, reference=None, title: str = ""):
    """Histogram of the particles with the exact curve if given, else the mollified density."""
    x = state.positions[:, 0]
    pad = 3.0 * spec.epsilon
    grid = np.linspace(x.min() - pad, x.max() + pad, 400)
    if reference is not None:
        curve = (reference.grid, reference.values)
    else:
        curve = (grid, MixtureDensity.from_spec(state, spec).eval(grid))
    return histogram_plot(x, bins=max(10, int(math.sqrt(state.N)) * 2), curve=curve, title=title)


# -- reference solutions -----------------------------------------------------------

def reference_density(cfg: RunConfig, elapsed: float):
    """Closed-form density at ``elapsed`` time past the initial state, or ``None``."""
    if cfg.get("kernel", "dim") != 1:
        return None
    eq, ini, pot = cfg.get("problem", "equation"), cfg["init"], cfg.get("potential", "kind")
    if eq == "heat" and ini["kind"] == "gaussian":
        s0, mu = ini["s0"], ini["mu"]
        if pot == "none":
            s = math.sqrt(s0 * s0 + 2 * elapsed)
            return GridDensity1D.from_function(lambda x: heat_exact(s0, elapsed, x - mu), mu - 12 * s,
                                               mu + 12 * s, 40001)
        if pot == "quadratic":
            s = max(s0, 1.0)
            return GridDensity1D.from_function(lambda x: ou_exact(mu, s0, elapsed, x), -abs(mu) - 12 * s,
                                               abs(mu) + 12 * s, 40001)
    if eq == "fast" and ini["kind"] == "barenblatt" and pot == "none":
        return barenblatt_grid(cfg.get("problem", "m"), ini["t0"] + elapsed)
    return None


# -- subcommands -----------------------------------------------------------------

def _simulate(cfg: RunConfig, spec=None, init=None, T=None):
    spec = spec or cfg.problem()
    init = init or cfg.initial_state()
    s = cfg["sim"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SupportBoundWarning)
        traj = simulate(spec, init, s["T"] if T is None else T, cfg.dt(), snapshot_every=s["snapshot_every"],
                        method=s["method"], c_stab=s["c_stab"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return spec, traj


def _write_trajectory(cfg: RunConfig, out: str, spec, traj) -> None:
    _write_states(os.path.join(out, "trajectory.csv"), traj.states)
    cols = list(REPORT_COLUMNS) + [f"com{a}" for a in range(spec.dim)]
    _write_csv(os.path.join(out, "report.csv"), cols, ([row[c] for c in cols] for row in traj.report))
    _write_states(os.path.join(out, "final_state.csv"), [traj.final])
    if cfg.get("output", "svg"):
        write_svg(os.path.join(out, "energy.svg"),
                  line_plot([(traj.times, traj.column("energy"), "energy")], "Energy decay", "t", "energy"))
        if spec.dim == 1:
            ref = reference_density(cfg, traj.final.time - traj.states[0].time)
            write_svg(os.path.join(out, "density.svg"),
                      _density_plot(traj.final, spec, ref, f"Particles at t = {traj.final.time:.4g}"))


def cmd_simulate(cfg: RunConfig, out: str) -> int:
    spec, traj = _simulate(cfg)
    _write_trajectory(cfg, out, spec, traj)
    log.info("simulate: %d snapshots written to %s", len(traj.times), out)
    return EXIT_OK


def _schedule(cfg: RunConfig):
    s = cfg["study"]
    sig = s["sigma"] or (None,) * len(s["N"])
    return list(zip(s["N"], s["epsilon"], sig))


def _convergence_point(raw: dict, N: int, eps: float, sigma):
    """One schedule entry; runs in a worker that shares only the configuration."""
    cfg = parse_config("", {(sec, key): val for sec, keys in raw.items() for key, val in keys.items()})
    spec = cfg.problem(epsilon=eps, sigma=sigma)
    init = cfg.initial_state(N)
    t0 = init.time
    checkpoints = [t0 + t for t in cfg.get("study", "checkpoints")]
    res = run_checkpoints(spec, init, checkpoints, t0=t0, c_stab=cfg.get("sim", "c_stab"))
    rows = []
    for tc in checkpoints:
        dd = w2_particles_vs_density_1d(res[tc][0], reference_density(cfg, tc - t0))
        rows.append((N, eps, spec.sigma, tc - t0, dd.value, dd.floor))
    return rows


def cmd_convergence(cfg: RunConfig, out: str) -> int:
    if reference_density(cfg, 0.0) is None:
        raise ConfigError("convergence needs a closed-form reference: d = 1 heat with gaussian init "
                          "(no potential or quadratic) or fast diffusion with barenblatt init")
    sched = _schedule(cfg)
    sigmas = [cfg.get("problem", "sigma") if e[2] is None else e[2] for e in sched]
    if cfg.get("problem", "lift") == "exp2" and any(s > 0 for s in sigmas):
        # quadratic velocity growth of the exp2 lift is outside the particle convergence theory
        raise ConfigError("convergence studies need the exp1 lift when sigma > 0")
    threads = cfg.get("run", "threads")
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_convergence_point, cfg.raw, *e) for e in sched]
            results = [f.result() for f in futures]
    else:
        results = [_convergence_point(cfg.raw, *e) for e in sched]
    rows = [r for res in results for r in res]
    _write_csv(os.path.join(out, "errors.csv"), ["N", "epsilon", "sigma", "t", "error", "floor"], rows)
    summary, series = [], []
    for t in cfg.get("study", "checkpoints"):
        pts = [r for r in rows if r[3] == t]
        eps = [r[1] for r in pts]
        err = [r[4] for r in pts]
        slope, r2 = rate_fit((eps, err)) if len(pts) > 2 else (math.nan, math.nan)
        dec = bool(np.all(np.diff(err) < 0))
        summary.append((t, slope, r2, dec, err[-1]))
        series.append((eps, err, f"t = {t:g}"))
        print(f"t = {t:g}: errors {', '.join(f'{e:.4g}' for e in err)}; slope {slope:.3f}; "
              f"strictly decreasing {dec}")
    _write_csv(os.path.join(out, "rate_fit.csv"), ["t", "slope", "r2", "strictly_decreasing", "final_error"],
               summary)
    if cfg.get("output", "svg"):
        write_svg(os.path.join(out, "errors.svg"),
                  line_plot(series, "d_W error against epsilon", "epsilon", "error", logy=True))
    return EXIT_OK


def validation_settings(cfg: RunConfig) -> ValidationSettings:
    v = cfg["validate"]
    sigma = cfg.get("problem", "sigma")
    return ValidationSettings(peetre_samples=v["peetre_samples"], samples=v["samples"], pilot_eps=v["pilot_eps"],
                              margin=v["margin"], m=cfg.get("problem", "m") or 0.8,
                              sigma=sigma if sigma > 0 else 0.1, norm_scale=v["norm_scale"],
                              seed=cfg.get("run", "seed"))


def cmd_validate(cfg: RunConfig, out: str) -> int:
    rows = run_validation(validation_settings(cfg))
    _write_csv(os.path.join(out, "validation.csv"), VALIDATION_COLUMNS,
               ([r.check, r.kind, r.value, r.bound, r.passed] for r in rows))
    failed = [r for r in rows if not r.passed]
    print(f"validate: {len(rows) - len(failed)}/{len(rows)} checks passed")
    for r in failed:
        print(f"FAILED {r.check}: {r.value:.6g} > {r.bound:.6g}", file=sys.stderr)
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_jko(cfg: RunConfig, out: str) -> int:
    if cfg.get("kernel", "dim") != 1:
        raise ConfigError("jko needs kernel.dim = 1")
    j = cfg["jko"]
    spec = cfg.problem()
    if spec.equation == "heat":
        spec = replace(spec, apply_sigma_factor=True)
    init = cfg.initial_state(j["M"])
    q0 = QuantileDiscretization.from_state(init)
    checkpoints = [t for t in j["checkpoints"] if t > 0]
    ode = run_checkpoints(spec, init, [init.time + t for t in checkpoints], t0=init.time,
                          c_stab=cfg.get("sim", "c_stab"))
    energy = JKOEnergy(spec)
    cert, gaps, series = [], [], []
    for tau in j["tau"]:
        res = jko_solve(q0, tau, j["n_steps"], energy, tol=j["tol"], max_iter=j["max_iter"])
        _write_csv(os.path.join(out, f"jko_tau{tau:g}.csv"), ["step", "energy", "w2_increment"], res.rows())
        e = np.asarray(res.energies)
        cert.append((tau, j["n_steps"], bool(np.all(np.diff(e) <= 0)), float(np.max(np.diff(e)))))
        horizon = j["n_steps"] * tau + 1e-12
        sup = 0.0
        for t in checkpoints:
            if t <= horizon:
                g = w2_1d(res.interpolant(t), ode[init.time + t][0])
                gaps.append((tau, t, g))
                sup = max(sup, g)
        series.append((np.arange(len(e)) * tau, e, f"tau = {tau:g}"))
        print(f"tau = {tau:g}: energy non-increasing {cert[-1][2]}, sup gap to ODE {sup:.4g}")
    _write_csv(os.path.join(out, "jko_certificate.csv"), ["tau", "n_steps", "energy_non_increasing", "max_increase"],
               cert)
    _write_csv(os.path.join(out, "jko_gap.csv"), ["tau", "t", "gap"], gaps)
    if cfg.get("output", "svg"):
        write_svg(os.path.join(out, "jko_energy.svg"), line_plot(series, "JKO energies", "t", "energy"))
    return EXIT_OK


def cmd_gibbs(cfg: RunConfig, out: str) -> int:
    if cfg.get("kernel", "dim") != 1 or cfg.get("problem", "equation") != "heat":
        raise ConfigError("gibbs needs a d = 1 heat problem")
    spec = cfg.problem()
    pot = spec.potential
    init = cfg.initial_state()
    t0 = init.time
    checkpoints = [t for t in cfg.get("gibbs", "checkpoints") if 0 < t <= cfg.get("gibbs", "T") + 1e-12]
    if not checkpoints:
        raise ConfigError("gibbs.checkpoints must contain times in (0, gibbs.T]")
    res = run_checkpoints(spec, init, [t0 + t for t in checkpoints], t0=t0, c_stab=cfg.get("sim", "c_stab"))
    if pot.active:
        target = GridDensity1D.from_function(lambda x: gibbs_density(pot, x), -12.0, 12.0, 40001)
    else:
        target = None
        print("gibbs: no potential configured; reporting the plain heat run")
    floor = quantization_floor(target, init.N) if target is not None else math.nan
    rows = []
    for t in checkpoints:
        state = res[t0 + t][0]
        d_g = w2_particles_vs_density_1d(state, target).value if target is not None else math.nan
        ref = reference_density(cfg, t)
        d_ref = w2_particles_vs_density_1d(state, ref).value if ref is not None else math.nan
        rows.append((t, d_g, d_ref, floor))
        print(f"t = {t:g}: d_W to Gibbs {d_g:.5g}, to exact flow {d_ref:.5g}")
    _write_csv(os.path.join(out, "gibbs.csv"), ["t", "dW_gibbs", "dW_exact", "floor"], rows)
    _write_states(os.path.join(out, "final_state.csv"), [res[t0 + checkpoints[-1]][0]])
    if cfg.get("output", "svg"):
        write_svg(os.path.join(out, "gibbs.svg"),
                  line_plot([([r[0] for r in rows], [r[1] for r in rows], "d_W to Gibbs"),
                             ([r[0] for r in rows], [r[3] for r in rows], "quantization floor")],
                            "Relaxation to the Gibbs measure", "t", "d_W", logy=True))
        write_svg(os.path.join(out, "density.svg"),
                  _density_plot(res[t0 + checkpoints[-1]][0], spec, target, "Particles against exp(-V)/Z"))
    return EXIT_OK


HANDLERS = {"simulate": cmd_simulate, "convergence": cmd_convergence, "validate": cmd_validate,
            "jko": cmd_jko, "gibbs": cmd_gibbs}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blobflow", description="Blob-method particle solvers for diffusion.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="INI configuration file")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--threads", type=int, metavar="K", help="worker processes for study schedules")
    p.add_argument("--seed", type=int, metavar="S", help="seed of the randomized property checks")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--version", action="version", version=f"blobflow {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {}
    if args.threads is not None:
        overrides[("run", "threads")] = args.threads
    if args.seed is not None:
        overrides[("run", "seed")] = args.seed
    try:
        cfg = load_config(args.config, overrides)
        out = cfg.output_dir(args.out)
        _prepare_out(cfg, out)
        return HANDLERS[args.command](cfg, out)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, EvaluationError, ConvergenceError, CoverageError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
