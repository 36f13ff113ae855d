"""Run configuration and its INI text form.

Schema (every key optional, unknown sections or keys are rejected)::

    [run]         problem, mode (plain|wr|wr-sa), seed, ese_max
    [population]  size, offspring
    [variation]   p_c, eta_c, eta_m, p_m (blank = 1/N), sbx_var_prob
    [surrogate]   n_doe, n_infill, k
    [repair]      rho, max_iter, restarts, penalty_weights (comma list),
                  slack, step_fraction, xtol

The same text is embedded as ``#`` lines in every CSV artifact so a run can
be reproduced from its output alone.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from machopt.nsga2 import VariationConfig
from machopt.repair import RepairConfig

SCHEMA_VERSION = "1"
MODES = ("plain", "wr", "wr-sa")


class ConfigError(ValueError):
    """Invalid configuration text; message carries the line number when known."""


@dataclass(frozen=True)
class RunConfig:
    problem: str = "ipm-proxy-v1"
    mode: str = "wr-sa"
    seed: int = 1
    ese_max: int = 200
    pop_size: int = 100
    n_offspring: int = 20
    n_doe: int = 60
    n_infill: int = 10
    k: int = 35
    variation: VariationConfig = field(default_factory=VariationConfig)
    repair: RepairConfig = field(default_factory=RepairConfig)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}")
        if self.ese_max < 1 or self.pop_size < 2 or self.n_offspring < 1:
            raise ValueError("ese_max >= 1, pop_size >= 2 and offspring >= 1 are required")
        if self.n_offspring % 2:
            raise ValueError("offspring count must be even (children come in pairs)")
        if not 1 <= self.n_infill <= self.pop_size:
            raise ValueError("n_infill must lie in [1, pop_size]")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.mode == "wr-sa" and not 1 <= self.n_doe <= self.ese_max:
            raise ValueError("n_doe must lie in [1, ese_max]")

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


# (section, key) -> (attribute path, parser)
def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _opt_float(text: str) -> float | None:
    return None if text.strip() == "" else float(text)


_FIELDS = {
    ("run", "problem"): ("problem", str),
    ("run", "mode"): ("mode", str),
    ("run", "seed"): ("seed", int),
    ("run", "ese_max"): ("ese_max", int),
    ("population", "size"): ("pop_size", int),
    ("population", "offspring"): ("n_offspring", int),
    ("surrogate", "n_doe"): ("n_doe", int),
    ("surrogate", "n_infill"): ("n_infill", int),
    ("surrogate", "k"): ("k", int),
    ("variation", "p_c"): ("variation.p_c", float),
    ("variation", "eta_c"): ("variation.eta_c", float),
    ("variation", "eta_m"): ("variation.eta_m", float),
    ("variation", "p_m"): ("variation.p_m", _opt_float),
    ("variation", "sbx_var_prob"): ("variation.sbx_var_prob", float),
    ("repair", "rho"): ("repair.rho", int),
    ("repair", "max_iter"): ("repair.max_iter", int),
    ("repair", "restarts"): ("repair.restarts", int),
    ("repair", "penalty_weights"): ("repair.penalty_weights", _floats),
    ("repair", "slack"): ("repair.slack", float),
    ("repair", "step_fraction"): ("repair.step_fraction", float),
    ("repair", "xtol"): ("repair.xtol", float),
}
_SECTIONS = ("run", "population", "variation", "surrogate", "repair")


def _locate(lines: list[str], section: str, key: str | None = None) -> int | None:
    current = None
    for no, line in enumerate(lines, 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return no
        elif key is not None and current == section and "=" in s:
            if s.split("=", 1)[0].strip().lower() == key:
                return no
    return None


def _at(no: int | None) -> str:
    return f"line {no}: " if no else ""


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse INI text over ``base`` (defaults when omitted).

    Raises:
        ConfigError: on syntax errors, unknown sections/keys or invalid values.
    """
    lines = text.splitlines()
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        no = getattr(exc, "lineno", None)
        raise ConfigError(f"{_at(no)}{exc.message if hasattr(exc, 'message') else exc}") from None
    top: dict = {}
    nested: dict[str, dict] = {"variation": {}, "repair": {}}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{_at(_locate(lines, section))}unknown section [{section}]")
        for key, raw in cp.items(section):
            if (section, key) not in _FIELDS:
                raise ConfigError(f"{_at(_locate(lines, section, key))}unknown key '{key}' in [{section}]")
            attr, conv = _FIELDS[(section, key)]
            try:
                value = conv(raw)
            except ValueError:
                raise ConfigError(f"{_at(_locate(lines, section, key))}bad value {raw!r} for '{key}'") from None
            if "." in attr:
                outer, inner = attr.split(".")
                nested[outer][inner] = value
            else:
                top[attr] = value
    base = base or RunConfig()
    try:
        variation = dataclasses.replace(base.variation, **nested["variation"])
        rep = dataclasses.replace(base.repair, **nested["repair"])
        return dataclasses.replace(base, variation=variation, repair=rep, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg: RunConfig) -> str:
    """Canonical INI text; ``parse_config(dump_config(c)) == c``."""
    v, r = cfg.variation, cfg.repair
    out = [
        "[run]",
        f"problem = {cfg.problem}",
        f"mode = {cfg.mode}",
        f"seed = {cfg.seed}",
        f"ese_max = {cfg.ese_max}",
        "[population]",
        f"size = {cfg.pop_size}",
        f"offspring = {cfg.n_offspring}",
        "[variation]",
        f"p_c = {v.p_c!r}",
        f"eta_c = {v.eta_c!r}",
        f"eta_m = {v.eta_m!r}",
        f"p_m = {'' if v.p_m is None else repr(v.p_m)}",
        f"sbx_var_prob = {v.sbx_var_prob!r}",
        "[surrogate]",
        f"n_doe = {cfg.n_doe}",
        f"n_infill = {cfg.n_infill}",
        f"k = {cfg.k}",
        "[repair]",
        f"rho = {r.rho}",
        f"max_iter = {r.max_iter}",
        f"restarts = {r.restarts}",
        f"penalty_weights = {', '.join(repr(float(w)) for w in r.penalty_weights)}",
        f"slack = {r.slack!r}",
        f"step_fraction = {r.step_fraction!r}",
        f"xtol = {r.xtol!r}",
    ]
    return "\n".join(out) + "\n"


def embedded_header(cfg: RunConfig) -> list[str]:
    """Comment lines placed at the top of CSV artifacts."""
    return [f"machopt schema {SCHEMA_VERSION}", "config-begin", *dump_config(cfg).splitlines(), "config-end"]


def extract_embedded(path) -> RunConfig:
    """Recover the run configuration from a CSV artifact's comment header."""
    body: list[str] = []
    inside = False
    with open(path) as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            s = line[2:].rstrip("\n")
            if s == "config-begin":
                inside = True
            elif s == "config-end":
                return parse_config("\n".join(body) + "\n")
            elif inside:
                body.append(s)
    raise ConfigError(f"{path}: no embedded configuration found")
