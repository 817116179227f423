"""Run configuration: an INI-style ``key = value`` file with sections.

Every key has a default (see :data:`DEFAULTS`); unknown sections or keys are
errors.  Command-line flags override file values.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DomainError
from .geometry import ProblemParams

# section -> key -> (type, default, help)
DEFAULTS: dict = {
    "problem": {
        "n": (int, 4, "dimension of the sphere S^n"),
        "gamma": (float, 0.5, "fractional order, 0 < gamma < 1"),
    },
    "curvature": {
        "K": (str, "1+0.1*x5", "curvature expression in x1..x{n+1}"),
        "probe_points": (int, 10_000, "positivity probe size"),
        "n_starts": (int, 512, "critical-point search starts"),
        "search_seed": (int, 0, "seed of the search starts"),
    },
    "quadrature": {
        "L": (int, 400, "zonal truncation degree for the spectral checks"),
        "test_points": (int, 50, "test grid size of the solution-property check"),
        "order": (int, 16, "Gauss order of the polar panels"),
        "inner": (int, 12, "Gauss order of the inner angular rule"),
        "n_phi": (int, 12, "azimuthal nodes of the tensor rule"),
    },
    "flow": {
        "p": (int, 1, "number of bubbles"),
        "placement": (str, "near", "'near' (random start near I^+ points) or 'explicit'"),
        "placement_radius": (float, 0.5, "maximal geodesic start distance from the I^+ point"),
        "centers": (str, "", "explicit centres: ';'-separated comma lists"),
        "lambda0": (float, 10.0, "initial concentration (all bubbles)"),
        "lambda_max": (float, 1e3, "concentration threshold of the Concentration event"),
        "lambda_min": (float, 1.0, "stall guard"),
        "s_max": (float, 1e5, "flow-time limit"),
        "sample_interval": (float, 50.0, "trajectory sampling interval in flow time"),
        "rtol": (float, 1e-8, "relative tolerance of the integrator"),
        "atol": (float, 1e-10, "absolute tolerance of the integrator"),
        "match_radius": (float, 0.1, "centre match radius for Concentration"),
        "seed": (int, 0, "seed of the initial placements"),
        "ensemble": (int, 1, "number of trajectories"),
    },
    "criterion": {
        "p_max": (int, 0, "largest tuple size in the catalog (0 = all)"),
    },
    "output": {
        "dir": (str, "out", "output directory"),
        "report": (str, "report.json", "report file name inside dir"),
        "trajectories": (str, "trajectories", "trajectory subdirectory inside dir"),
    },
    "run": {
        "threads": (int, 1, "worker cap for ensembles"),
    },
}


def _convert(typ, raw):
    if typ is int and isinstance(raw, str):
        try:
            return int(raw)
        except ValueError:
            f = float(raw)  # accept 1e3-style integers
            if not f.is_integer():
                raise
            return int(f)
    if typ is int and isinstance(raw, float) and not raw.is_integer():
        raise ValueError("not an integer")
    return typ(raw)


@dataclass
class RunConfig:
    """Parsed configuration: ``values[section][key]`` with the declared types."""

    values: dict = field(default_factory=lambda: {s: {k: v[1] for k, v in keys.items()}
                                                   for s, keys in DEFAULTS.items()})
    source: str | None = None

    def __getitem__(self, section):
        return self.values[section]

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self["problem"]["n"], self["problem"]["gamma"])

    def set(self, section: str, key: str, raw) -> None:
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        if key not in DEFAULTS[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        typ = DEFAULTS[section][key][0]
        try:
            val = _convert(typ, raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {typ.__name__}") from exc
        self.values[section][key] = val

    def validate(self) -> "RunConfig":
        try:
            self.params
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        f = self["flow"]
        if f["p"] < 1:
            raise ConfigError("[flow] p must be >= 1")
        if f["ensemble"] < 1:
            raise ConfigError("[flow] ensemble must be >= 1")
        if f["placement"] not in ("near", "explicit"):
            raise ConfigError(f"[flow] placement must be 'near' or 'explicit', got {f['placement']!r}")
        if f["placement"] == "explicit" and not f["centers"].strip():
            raise ConfigError("[flow] explicit placement needs centers")
        positive = [("flow", "lambda0"), ("flow", "lambda_max"), ("flow", "s_max"),
                    ("flow", "sample_interval"), ("flow", "rtol"), ("flow", "atol"),
                    ("flow", "match_radius"), ("quadrature", "L"), ("quadrature", "test_points"),
                    ("run", "threads")]
        for s, k in positive:
            if not self[s][k] > 0:
                raise ConfigError(f"[{s}] {k} must be positive")
        if self["criterion"]["p_max"] < 0:
            raise ConfigError("[criterion] p_max must be >= 0")
        return self

    def to_dict(self) -> dict:
        return {s: dict(v) for s, v in self.values.items()}


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (optional), apply ``overrides`` {(section, key): value}, validate.

    Raises
    ------
    ConfigError
        Unreadable file, unknown section or key, bad value, parameter out of range.
    """
    cfg = RunConfig()
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        cp.optionxform = str  # keys are case sensitive (K)
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in cp.sections():
            for key, raw in cp.items(section):
                cfg.set(section, key, raw)
        cfg.source = str(Path(path))
    for (section, key), value in (overrides or {}).items():
        if value is not None:
            cfg.set(section, key, value)
    return cfg.validate()


def describe_defaults() -> str:
    """The default configuration as a commented config file."""
    lines = []
    for s, keys in DEFAULTS.items():
        lines.append(f"[{s}]")
        for k, (typ, default, doc) in keys.items():
            lines.append(f"# {doc}")
            lines.append(f"{k} = {default}")
        lines.append("")
    return "\n".join(lines)
