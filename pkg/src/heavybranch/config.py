"""Flat key=value experiment configuration with strict key checking."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import branching

# Canonical check identifiers; the CLI registry must cover exactly these.
KNOWN_CHECKS = (
    "constants",
    "tail_ratio",
    "karamata",
    "hill",
    "b_plus",
    "anti_clustering",
    "mixing",
    "tail_process",
    "centering_limit",
    "fidis_ks",
    "stable_selftest",
)


class ConfigError(ValueError):
    """Raised for unknown keys, malformed values, or invalid model settings."""


@dataclass(frozen=True)
class ExperimentConfig:
    offspring_mean: float = 0.5
    offspring_family: str = "bernoulli"
    alpha: float = 0.5
    n: int = 10_000
    copies: int = 1
    replications: int = 100_000
    grid: tuple[float, ...] = (1.0,)
    centering: str = "auto"
    gamma1: float | None = None
    gamma2: float | None = None
    seed: int = 12345
    out_dir: str = "out"
    format: str = "csv"
    checks: tuple[str, ...] = ("constants", "tail_ratio", "b_plus")
    plots: bool = True
    stationarity_tolerance: float = 1e-4
    tolerances: dict[str, float] = field(default_factory=dict)

    def model(self) -> branching.GWIModel:
        try:
            return branching.make_model(
                self.offspring_mean, self.alpha, self.offspring_family,
                self.stationarity_tolerance)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def centering_kind(self) -> str:
        if self.centering != "auto":
            return self.centering
        return "none" if self.alpha < 1.0 else "full"

    def tolerance(self, check_id: str, default: float) -> float:
        return self.tolerances.get(check_id, default)


_FLOAT_KEYS = {"offspring_mean", "alpha", "stationarity_tolerance"}
_OPT_FLOAT_KEYS = {"gamma1", "gamma2"}
_INT_KEYS = {"n", "copies", "replications", "seed"}
_STR_KEYS = {"offspring_family", "centering", "out_dir", "format"}
_BOOL_KEYS = {"plots"}
_LIST_KEYS = {"grid", "checks"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` lines; '#' starts a comment; keys are strict."""
    values: dict[str, object] = {}
    tolerances: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key.startswith("tolerance."):
            check = key[len("tolerance."):]
            if check not in KNOWN_CHECKS:
                raise ConfigError(f"line {lineno}: unknown check in {key!r}")
            tolerances[check] = _parse_float(key, val)
        elif key in _FLOAT_KEYS:
            values[key] = _parse_float(key, val)
        elif key in _OPT_FLOAT_KEYS:
            values[key] = None if val == "" else _parse_float(key, val)
        elif key in _INT_KEYS:
            values[key] = _parse_int(key, val)
        elif key in _STR_KEYS:
            values[key] = val
        elif key in _BOOL_KEYS:
            if val not in ("true", "false"):
                raise ConfigError(f"{key} must be true or false, got {val!r}")
            values[key] = val == "true"
        elif key == "grid":
            values[key] = tuple(_parse_float(key, v) for v in val.split(",") if v)
        elif key == "checks":
            items = tuple(v.strip() for v in val.split(",") if v.strip())
            for item in items:
                if item not in KNOWN_CHECKS:
                    raise ConfigError(
                        f"unknown check {item!r}; known: {', '.join(KNOWN_CHECKS)}")
            values[key] = items
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    cfg = ExperimentConfig(**values, tolerances=tolerances)  # type: ignore[arg-type]
    _validate(cfg)
    return cfg


def _parse_float(key: str, val: str) -> float:
    try:
        return float(val)
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {val!r}") from exc


def _parse_int(key: str, val: str) -> int:
    try:
        return int(val)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {val!r}") from exc


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
    if cfg.centering not in ("auto", "none", "truncated", "full"):
        raise ConfigError(f"unknown centering {cfg.centering!r}")
    if cfg.n < 1 or cfg.copies < 1 or cfg.replications < 1:
        raise ConfigError("n, copies and replications must be positive")
    if cfg.seed < 0 or cfg.seed > 2 ** 64 - 1:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if cfg.grid and (cfg.grid[0] <= 0
                     or any(b <= a for a, b in zip(cfg.grid, cfg.grid[1:]))):
        raise ConfigError("grid times must be positive and strictly increasing")
    cfg.model()  # re-validate model invariants on load


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(parse(text))) is idempotent."""
    lines = [
        f"offspring_mean = {cfg.offspring_mean!r}",
        f"offspring_family = {cfg.offspring_family}",
        f"alpha = {cfg.alpha!r}",
        f"n = {cfg.n}",
        f"copies = {cfg.copies}",
        f"replications = {cfg.replications}",
        "grid = " + ",".join(repr(t) for t in cfg.grid),
        f"centering = {cfg.centering}",
        "gamma1 = " + ("" if cfg.gamma1 is None else repr(cfg.gamma1)),
        "gamma2 = " + ("" if cfg.gamma2 is None else repr(cfg.gamma2)),
        f"seed = {cfg.seed}",
        f"out_dir = {cfg.out_dir}",
        f"format = {cfg.format}",
        "checks = " + ",".join(cfg.checks),
        f"plots = {'true' if cfg.plots else 'false'}",
        f"stationarity_tolerance = {cfg.stationarity_tolerance!r}",
    ]
    for check in sorted(cfg.tolerances):
        lines.append(f"tolerance.{check} = {cfg.tolerances[check]!r}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_overrides(cfg: ExperimentConfig, *, seed: int | None = None,
                   out_dir: str | None = None,
                   format: str | None = None) -> ExperimentConfig:
    """Apply command-line overrides on top of a parsed config."""
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if out_dir is not None:
        updates["out_dir"] = out_dir
    if format is not None:
        if format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {format!r}")
        updates["format"] = format
    return replace(cfg, **updates) if updates else cfg
