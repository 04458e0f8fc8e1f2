"""Experiment configuration: YAML file plus command-line flags.

The config file is a flat mapping keyed by the long flag names (without the
leading ``--``), e.g.::

    k: 10
    seed: 7
    t-grid: 1e2, 1e3, 1e4
    layers: [16, 64, 64, 100]

Flags override file values; every override is logged.
"""

import logging
import math
from dataclasses import dataclass, field

import yaml

from ..equivalence import DEFAULT_T_GRID
from ..errors import ConfigError, InvalidInputError
from ..numerics import check_seed

log = logging.getLogger(__name__)

COMMANDS = ("gradcheck", "sweep", "init-stats", "logit-descent", "train-compare")

# flag / file key -> config attribute
KEYS = {
    "k": "K",
    "seed": "seed",
    "t-grid": "T_grid",
    "runs": "runs",
    "steps": "steps",
    "lr": "lr",
    "layers": "layer_dims",
    "tol": "tol",
    "reg-sign": "reg_sign",
    "out": "output_path",
    "format": "format",
}

# per-command defaults for fields left unset
COMMAND_DEFAULTS = {
    "gradcheck": {"runs": 1000},
    "sweep": {"runs": 100},
    "init-stats": {"runs": 1000, "K": 100},
    "logit-descent": {"runs": 5, "K": 10, "steps": 10_000, "lr": 0.1},
    "train-compare": {"K": 10, "steps": 200, "lr": 0.1},
}


@dataclass
class ExperimentConfig:
    command: str
    seed: int = 0
    K: int = None
    T_grid: tuple = DEFAULT_T_GRID
    runs: int = None
    steps: int = None
    lr: float = None
    layer_dims: tuple = None
    tol: float = 1e-9
    reg_sign: int = -1
    output_path: str = None
    format: str = "csv"
    provenance: dict = field(default_factory=dict, compare=False)

    def default_output(self):
        return f"{self.command}-seed{self.seed}.{self.format}"


def _floats(value, key):
    if isinstance(value, str):
        parts = [p for p in value.replace(" ", "").split(",") if p]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = [value]
    try:
        return tuple(float(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a comma-separated list of numbers, got {value!r}") from None


def _ints(value, key):
    vals = _floats(value, key)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{key}: expected integers, got {value!r}")
    return tuple(int(v) for v in vals)


def _scalar(value, key, kind):
    try:
        if kind is int:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def _coerce(key, value):
    if key == "t-grid":
        return _floats(value, key)
    if key == "layers":
        return _ints(value, key)
    if key in ("k", "seed", "runs", "steps"):
        return _scalar(value, key, int)
    if key in ("lr", "tol"):
        return _scalar(value, key, float)
    if key == "reg-sign":
        return _scalar(str(value).strip(), key, int)
    return str(value)


def read_config_file(path):
    """Parse a flat YAML mapping; errors carry the file line of the offending key."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        node = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: parse error at {where}: {exc.problem}") from exc
    if node is None:
        return {}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{path}: top level must be a key/value mapping")
    out = {}
    for key_node, value_node in node.value:
        key = str(key_node.value)
        line = key_node.start_mark.line + 1
        if key != "command" and key not in KEYS:
            raise ConfigError(f"{path}, line {line}: unknown field {key!r}")
        if isinstance(value_node, yaml.SequenceNode):
            value = [v.value for v in value_node.value]
        elif isinstance(value_node, yaml.ScalarNode):
            value = value_node.value
        else:
            raise ConfigError(f"{path}, line {line}: field {key!r} must be a scalar or a list")
        try:
            out[key] = value if key == "command" else _coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{path}, line {line}: {exc}") from None
    return out


def _check(cond, message):
    if not cond:
        raise ConfigError(message)


def validate(cfg):
    _check(cfg.command in COMMANDS, f"command must be one of {COMMANDS}, got {cfg.command!r}")
    try:
        cfg.seed = check_seed(cfg.seed)
    except InvalidInputError as exc:
        raise ConfigError(f"seed: {exc}") from None
    if cfg.K is not None:
        _check(cfg.K >= 2, f"k: class count must be >= 2, got {cfg.K}")
    grid = tuple(cfg.T_grid)
    _check(len(grid) >= 1, "t-grid: must not be empty")
    _check(all(math.isfinite(t) and t > 0 for t in grid), "t-grid: temperatures must be finite and > 0")
    _check(all(a < b for a, b in zip(grid, grid[1:])), "t-grid: temperatures must be strictly ascending")
    if cfg.runs is not None:
        _check(cfg.runs >= 1, f"runs: must be >= 1, got {cfg.runs}")
        if cfg.command == "init-stats":
            _check(cfg.runs >= 100, f"runs: init-stats needs >= 100 runs, got {cfg.runs}")
    if cfg.steps is not None:
        _check(cfg.steps >= 1, f"steps: must be >= 1, got {cfg.steps}")
    if cfg.lr is not None:
        _check(math.isfinite(cfg.lr) and cfg.lr > 0, f"lr: must be finite and > 0, got {cfg.lr}")
    if cfg.layer_dims is not None:
        dims = cfg.layer_dims
        _check(len(dims) >= 2 and all(d >= 1 for d in dims), f"layers: need >= 2 positive sizes, got {dims}")
        _check(dims[-1] >= 2, "layers: output size (class count) must be >= 2")
        if cfg.K is not None:
            _check(dims[-1] == cfg.K, f"layers: last size {dims[-1]} must equal k={cfg.K}")
    _check(math.isfinite(cfg.tol) and cfg.tol >= 0, f"tol: must be finite and >= 0, got {cfg.tol}")
    _check(cfg.reg_sign in (1, -1), f"reg-sign: must be +1 or -1, got {cfg.reg_sign}")
    _check(cfg.format in ("csv", "json"), f"format: must be csv or json, got {cfg.format!r}")
    return cfg


def apply_command_defaults(cfg):
    """Fill unset fields with per-command defaults (after validation of user values)."""
    if cfg.layer_dims is not None and cfg.K is None:
        cfg.K = cfg.layer_dims[-1]
    for name, value in COMMAND_DEFAULTS.get(cfg.command, {}).items():
        if getattr(cfg, name) is None:
            setattr(cfg, name, value)
            cfg.provenance.setdefault(name, "default")
    if cfg.command == "init-stats" and cfg.layer_dims is None:
        cfg.layer_dims = (16, 64, 64, cfg.K)
    if cfg.command == "train-compare" and cfg.layer_dims is None:
        cfg.layer_dims = (8, 32, 32, cfg.K)
    if cfg.output_path is None:
        cfg.output_path = cfg.default_output()
    return cfg


def load_config(command=None, config_path=None, flags=None):
    """Merge file values and flags into a validated :class:`ExperimentConfig`.

    ``flags`` maps flag names (``"k"``, ``"t-grid"``, ...) to raw values;
    ``None`` entries are ignored.
    """
    file_values = read_config_file(config_path) if config_path else {}
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    command = command or file_values.get("command")
    if command is None:
        raise ConfigError("no command given")
    if "command" in file_values and file_values["command"] != command:
        log.info("command %r from flags overrides %r from %s", command, file_values["command"], config_path)

    cfg = ExperimentConfig(command=command)
    for key, value in file_values.items():
        if key == "command":
            continue
        setattr(cfg, KEYS[key], value)
        cfg.provenance[KEYS[key]] = f"file:{config_path}"
    for key, raw in flags.items():
        if key not in KEYS:
            raise ConfigError(f"unknown flag --{key}")
        value = _coerce(key, raw)
        attr = KEYS[key]
        if attr in cfg.provenance and getattr(cfg, attr) != value:
            log.info("--%s=%r overrides %r from %s", key, value, getattr(cfg, attr), config_path)
        setattr(cfg, attr, value)
        cfg.provenance[attr] = "flag"
    validate(cfg)
    return apply_command_defaults(cfg)
