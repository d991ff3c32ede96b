"""INI run configuration: schema, parsing, validation and resolved output.

Every key has a type and a default; unknown sections or keys, bad values
and inadmissible parameter combinations raise :class:`ConfigError`.  The
only environment override is ``BLOBFLOW_OUT`` for the output directory.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .errors import ConfigError, InvalidParameterError
from .kernels import KernelFamily, MollifierKernel
from .model import ExternalPotential, ParticleState, ProblemSpec
from .quadrature import QuadSettings

OUT_ENV = "BLOBFLOW_OUT"


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _opt_float(text: str):
    return None if text.strip() in ("", "none", "None") else float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (parser, default text, help)
SCHEMA = {
    "problem": {
        "equation": (str, "heat", "heat | fast"),
        "sigma": (float, "0.1", "lift weight in [0, 1); heat only"),
        "m": (_opt_float, "", "fast-diffusion exponent in (d/(d+2), 1)"),
        "lift": (str, "exp1", "lift family: exp1 | exp2"),
        "apply_sigma_factor": (_bool, "false", "scale heat velocities by (1 - sigma)"),
        "c_r": (float, "1.0", "tightness constant in the convexity modulus (global kernels)"),
    },
    "kernel": {
        "family": (str, "polybump", "polybump | exp1 | exp2 | barenblatt"),
        "k": (int, "4", "PolyBump exponent"),
        "alpha": (_opt_float, "", "Barenblatt exponent; default 1/(2(1-m))"),
        "epsilon": (float, "0.3", "kernel width"),
        "dim": (int, "1", "spatial dimension, 1 or 2"),
    },
    "quad": {
        "n": (int, "8", "Gauss-Legendre nodes per panel and axis (velocity integrals)"),
        "n_energy": (int, "16", "Gauss-Legendre nodes per panel and axis (energies)"),
        "panel": (float, "1.0", "panel width in units of epsilon"),
        "tail_tol": (float, "1e-10", "tail tolerance for truncation radii"),
    },
    "potential": {
        "kind": (str, "none", "none | quadratic | double_well | polynomial"),
        "coeffs": (_floats, "", "double_well: a b; polynomial: c0 c1 c2 ..."),
    },
    "init": {
        "kind": (str, "gaussian", "gaussian | barenblatt | uniform | file"),
        "N": (int, "64", "number of particles"),
        "s0": (float, "1.0", "gaussian standard deviation"),
        "mu": (float, "0.0", "gaussian mean"),
        "t0": (float, "1.0", "barenblatt starting time"),
        "a": (float, "-1.0", "uniform left end"),
        "b": (float, "1.0", "uniform right end"),
        "path": (str, "", "file: whitespace/comma separated positions, one particle per line"),
    },
    "sim": {
        "T": (float, "0.5", "integration horizon"),
        "dt": (_opt_float, "", "time step; default 0.1 epsilon^2"),
        "method": (str, "rk4", "euler | rk4"),
        "snapshot_every": (int, "5", "steps between snapshots"),
        "c_stab": (float, "0.1", "stability constant, dt <= c_stab epsilon^2"),
    },
    "study": {
        "N": (_ints, "32 64 128 256", "particle numbers of the schedule"),
        "epsilon": (_floats, "0.4 0.3 0.2 0.15", "kernel widths of the schedule"),
        "sigma": (_floats, "", "optional lift weights of the schedule"),
        "checkpoints": (_floats, "0.25 0.5", "checkpoint times, elapsed from the initial time"),
    },
    "jko": {
        "M": (int, "128", "number of quantile atoms"),
        "tau": (_floats, "0.1 0.05 0.025", "time steps"),
        "n_steps": (int, "20", "JKO steps per run"),
        "tol": (float, "1e-10", "inner-solver tolerance"),
        "max_iter": (int, "5000", "inner-solver iteration cap"),
        "checkpoints": (_floats, "0.1 0.2 0.3 0.4 0.5", "times of the JKO-vs-ODE gap"),
    },
    "gibbs": {
        "T": (float, "5.0", "horizon"),
        "checkpoints": (_floats, "1 2 3 4 5", "times of the d_W series"),
    },
    "validate": {
        "samples": (int, "10000", "samples per lemma check"),
        "peetre_samples": (int, "100000", "samples for the Peetre check"),
        "margin": (float, "2.0", "calibration margin for hidden-constant lemmas"),
        "pilot_eps": (float, "0.4", "pilot epsilon of the calibration"),
        "norm_scale": (float, "1.0", "test hook: scales kernel normalization constants"),
    },
    "output": {
        "dir": (str, "out", "output directory (overridden by --out or BLOBFLOW_OUT)"),
        "svg": (_bool, "true", "emit SVG quick-look plots"),
    },
    "run": {
        "seed": (int, "0", "seed of the randomized property checks"),
        "threads": (int, "1", "worker processes for study schedules"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration; ``values[section][key]`` holds typed values."""

    values: dict
    raw: dict

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def get(self, section: str, key: str):
        return self.values[section][key]

    # -- derived objects -------------------------------------------------

    def kernel(self, epsilon: float | None = None) -> MollifierKernel:
        k = self["kernel"]
        fam = KernelFamily.from_name(k["family"], dim=k["dim"], k=k["k"], alpha=k["alpha"], m=self.get("problem", "m"))
        return MollifierKernel(fam, k["epsilon"] if epsilon is None else epsilon)

    def potential(self) -> ExternalPotential:
        return ExternalPotential(self.get("potential", "kind"), self.get("potential", "coeffs"))

    def problem(self, epsilon: float | None = None, sigma: float | None = None) -> ProblemSpec:
        p = self["problem"]
        q = self["quad"]
        dim = self.get("kernel", "dim")
        heat = p["equation"] == "heat"
        return ProblemSpec(
            p["equation"], self.kernel(epsilon),
            sigma=(p["sigma"] if sigma is None else sigma) if heat else 0.0,
            m=p["m"],
            lift=KernelFamily.from_name(p["lift"], dim=dim),
            potential=self.potential(),
            apply_sigma_factor=p["apply_sigma_factor"],
            quad=QuadSettings(q["n"], q["panel"], q["tail_tol"], q["n_energy"]),
        )

    def dt(self, epsilon: float | None = None) -> float:
        eps = self.get("kernel", "epsilon") if epsilon is None else epsilon
        dt = self.get("sim", "dt")
        return 0.1 * eps * eps if dt is None else dt

    def initial_state(self, N: int | None = None) -> ParticleState:
        from .reference import GridDensity1D, barenblatt_grid, heat_grid, quantize

        ini = self["init"]
        N = ini["N"] if N is None else N
        dim = self.get("kernel", "dim")
        kind = ini["kind"]
        if kind == "file":
            return _read_positions(ini["path"], dim)
        if dim != 1:
            raise ConfigError(f"init.kind = {kind} is only available in d = 1; use init.kind = file")
        if kind == "gaussian":
            return quantize(heat_grid(ini["s0"], 0.0), N).shifted(ini["mu"])
        if kind == "barenblatt":
            m = self.get("problem", "m") or 0.8
            return ParticleState(quantize(barenblatt_grid(m, ini["t0"]), N).positions, ini["t0"])
        a, b = ini["a"], ini["b"]
        return quantize(GridDensity1D.from_function(lambda x: ((x >= a) & (x <= b)).astype(float),
                                                    a, b, 20001), N)

    # -- output ----------------------------------------------------------

    def resolved_text(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        for section, keys in SCHEMA.items():
            parser[section] = {key: self.raw[section][key] for key in keys}
        from io import StringIO

        buf = StringIO()
        parser.write(buf)
        return buf.getvalue()

    def output_dir(self, override: str | None = None) -> str:
        if override:
            return override
        return os.environ.get(OUT_ENV) or self.get("output", "dir")


def _read_positions(path: str, dim: int) -> ParticleState:
    import numpy as np

    if not path:
        raise ConfigError("init.kind = file needs init.path")
    try:
        with open(path) as fh:
            rows = [line.replace(",", " ").split() for line in fh if line.strip() and not line.startswith("#")]
        x = np.array(rows, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read initial positions from {path}: {exc}") from exc
    if x.ndim != 2 or x.shape[1] != dim:
        raise ConfigError(f"{path}: expected {dim} column(s) per particle")
    return ParticleState(x)


def _check(cfg: RunConfig):
    """Cross-field checks beyond per-key types."""
    p, k = cfg["problem"], cfg["kernel"]
    if p["equation"] not in ("heat", "fast"):
        raise ConfigError(f"problem.equation must be heat or fast, got {p['equation']!r}")
    if k["dim"] not in (1, 2):
        raise ConfigError(f"kernel.dim must be 1 or 2, got {k['dim']}")
    if cfg.get("sim", "method") not in ("euler", "rk4"):
        raise ConfigError(f"sim.method must be euler or rk4, got {cfg.get('sim', 'method')!r}")
    if cfg.get("init", "kind") not in ("gaussian", "barenblatt", "uniform", "file"):
        raise ConfigError(f"unknown init.kind {cfg.get('init', 'kind')!r}")
    s = cfg["study"]
    if len(s["N"]) == 0 or len(s["N"]) != len(s["epsilon"]):
        raise ConfigError("study.N and study.epsilon must be nonempty lists of equal length")
    if s["sigma"] and len(s["sigma"]) != len(s["N"]):
        raise ConfigError("study.sigma must be empty or match study.N in length")
    if len(s["checkpoints"]) == 0:
        raise ConfigError("study.checkpoints must be nonempty")
    if len(cfg.get("jko", "tau")) == 0:
        raise ConfigError("jko.tau must be nonempty")
    if cfg.get("run", "threads") < 1:
        raise ConfigError("run.threads must be >= 1")
    try:
        cfg.problem()
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str = "", overrides: dict | None = None) -> RunConfig:
    """Parse INI text against :data:`SCHEMA`; ``overrides`` maps ``(section, key)`` to text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    raw = {section: {key: spec[1] for key, spec in keys.items()} for section, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            raw[section][key] = value.strip()
    for (section, key), value in (overrides or {}).items():
        raw[section][key] = str(value)
    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (conv, _, _) in keys.items():
            try:
                values[section][key] = conv(raw[section][key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{section}.{key} = {raw[section][key]!r}: {exc}") from exc
    cfg = RunConfig(values, raw)
    _check(cfg)
    return cfg


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)


def schema_markdown() -> str:
    """The schema as a Markdown table, one section per heading."""
    lines = ["# Configuration schema", "",
             "INI file with `key = value` entries. Lists are space or comma separated;",
             "an empty value selects the documented fallback. Unknown sections or keys are errors (exit 2).",
             f"The only environment variable read is `{OUT_ENV}` (output directory).", ""]
    for section, keys in SCHEMA.items():
        lines += [f"## [{section}]", "", "| key | default | meaning |", "|---|---|---|"]
        for key, (_, default, text) in keys.items():
            shown = f"`{default}`" if default else "(empty)"
            meaning = text.replace("|", "\\|")
            lines.append(f"| `{key}` | {shown} | {meaning} |")
        lines.append("")
    return "\n".join(lines)
