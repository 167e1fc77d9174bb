import json
import logging
import os
from dataclasses import MISSING, asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Type

from src.exceptions import ConfigError

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

THREADS_ENV = "DEFLAB_THREADS"


def _option(kind: str, default: Any = MISSING, minimum: Optional[float] = None, choices: Optional[tuple] = None, positive: bool = False):
    """Dataclass field carrying its validation rule in the metadata."""
    metadata = {"kind": kind, "minimum": minimum, "choices": choices, "positive": positive}
    if isinstance(default, list):
        return field(default_factory=lambda: list(default), metadata=metadata)
    return field(default=default, metadata=metadata)


def _fail(name: str, message: str):
    logging.error(f"Invalid configuration field '{name}': {message}")
    raise ConfigError(f"Invalid configuration field '{name}': {message}")


def _as_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
        _fail(name, f"expected an integer, got {value!r}")
    return int(value)


def _as_float(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(name, f"expected a number, got {value!r}")
    return float(value)


def _check_range(name: str, value: float, spec: dict) -> None:
    if spec["minimum"] is not None and value < spec["minimum"]:
        _fail(name, f"must be >= {spec['minimum']}, got {value}")
    if spec["positive"] and not value > 0:
        _fail(name, f"must be positive, got {value}")


def _coerce(name: str, value: Any, spec: dict) -> Any:
    kind = spec["kind"]
    if value is None:
        return None
    if kind in ("int", "float"):
        converted = _as_int(name, value) if kind == "int" else _as_float(name, value)
        _check_range(name, converted, spec)
        return converted
    if kind in ("int_list", "float_list"):
        items = value if isinstance(value, list) else [value]
        if not items:
            _fail(name, "must not be empty")
        converted = [_as_int(name, v) if kind == "int_list" else _as_float(name, v) for v in items]
        for v in converted:
            _check_range(name, v, spec)
        return converted
    if kind == "bool":
        if not isinstance(value, bool):
            _fail(name, f"expected true or false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            _fail(name, f"expected a string, got {value!r}")
        if spec["choices"] and value not in spec["choices"]:
            _fail(name, f"must be one of {list(spec['choices'])}, got {value!r}")
        return value
    raise ConfigError(f"Unknown field kind {kind} for '{name}'.")


def default_threads() -> int:
    """Logical core count unless DEFLAB_THREADS overrides it."""
    override = os.environ.get(THREADS_ENV)
    if override is not None:
        try:
            value = int(override)
        except ValueError:
            raise ConfigError(f"Invalid {THREADS_ENV}={override!r}: expected a positive integer.")
        if value < 1:
            raise ConfigError(f"Invalid {THREADS_ENV}={override!r}: expected a positive integer.")
        return value
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Per-command schemas
# ---------------------------------------------------------------------------
class BaseRunConfig:
    """Shared behaviour; every schema ends with the seed and threads fields."""

    seed: int
    threads: Optional[int]

    def resolved_threads(self) -> int:
        if os.environ.get(THREADS_ENV) is not None or self.threads is None:
            return default_threads()
        return self.threads

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DefinettiGapConfig(BaseRunConfig):
    d: List[int] = _option("int_list", minimum=1)
    N: List[int] = _option("int_list", minimum=1)
    n: List[int] = _option("int_list", [1], minimum=1)
    seeds: List[int] = _option("int_list", [0], minimum=0)
    rank: Optional[int] = _option("int", None, minimum=1)
    strict: bool = _option("bool", False)
    seed: int = _option("int", 0, minimum=0)
    threads: Optional[int] = _option("int", None, minimum=1)


@dataclass
class DFClassicalConfig(BaseRunConfig):
    K: List[int] = _option("int_list", minimum=1)
    N: List[int] = _option("int_list", minimum=1)
    n: Optional[List[int]] = _option("int_list", None, minimum=1)
    seeds: List[int] = _option("int_list", [0], minimum=0)
    concentration: float = _option("float", 1.0, positive=True)
    seed: int = _option("int", 0, minimum=0)
    threads: Optional[int] = _option("int", None, minimum=1)


PROBLEMS = ("diagonal", "free", "random")


@dataclass
class HartreeSweepConfig(BaseRunConfig):
    N: List[int] = _option("int_list", minimum=2)
    problem: str = _option("str", "diagonal", choices=PROBLEMS)
    d: int = _option("int", 2, minimum=1)
    g: float = _option("float", 2.0)
    restarts: int = _option("int", 16, minimum=1)
    max_iter: int = _option("int", 5000, minimum=1)
    grad_tol: float = _option("float", 1e-9, positive=True)
    seed: int = _option("int", 0, minimum=0)
    threads: Optional[int] = _option("int", None, minimum=1)


@dataclass
class GibbsSweepConfig(BaseRunConfig):
    N: List[int] = _option("int_list", minimum=1)
    problem: str = _option("str", "free", choices=PROBLEMS)
    d: int = _option("int", 2, minimum=1)
    g: float = _option("float", 2.0)
    t: float = _option("float", 1.0, positive=True)
    samples: int = _option("int", 100_000, minimum=1000)
    seed: int = _option("int", 0, minimum=0)
    threads: Optional[int] = _option("int", None, minimum=1)


@dataclass
class LocalizeCheckConfig(BaseRunConfig):
    d: List[int] = _option("int_list", minimum=1)
    N: List[int] = _option("int_list", minimum=1)
    instances: int = _option("int", 10, minimum=1)
    rank: Optional[int] = _option("int", None, minimum=1)
    seed: int = _option("int", 0, minimum=0)
    threads: Optional[int] = _option("int", None, minimum=1)


@dataclass
class LogGasRunConfig(BaseRunConfig):
    N: List[int] = _option("int_list", minimum=1)
    beta: float = _option("float", positive=True)
    steps: int = _option("int", 20_000, minimum=40)
    burn_in: int = _option("int", 10_000, minimum=0)
    chains: int = _option("int", 1, minimum=1)
    grid: int = _option("int", 128, minimum=64)
    alpha: float = _option("float", 0.0, minimum=0.0)
    strength: float = _option("float", 1.0, positive=True)
    power: float = _option("float", 2.0, positive=True)
    box_radius: float = _option("float", 1.5, positive=True)
    interaction: bool = _option("bool", True)
    beta_grid: Optional[List[float]] = _option("float_list", None, positive=True)
    seed: int = _option("int", 0, minimum=0)
    threads: Optional[int] = _option("int", None, minimum=1)


COMMAND_CONFIGS: Dict[str, Type[BaseRunConfig]] = {
    "definetti-gap": DefinettiGapConfig,
    "df-classical": DFClassicalConfig,
    "hartree-sweep": HartreeSweepConfig,
    "gibbs-sweep": GibbsSweepConfig,
    "localize-check": LocalizeCheckConfig,
    "loggas": LogGasRunConfig,
}


def parse_config(command: str, payload: dict) -> BaseRunConfig:
    """
    Validates a configuration mapping against the schema of a command.

    Parameters:
    command (str): One of COMMAND_CONFIGS.
    payload (dict): Parsed JSON object.

    Returns:
    BaseRunConfig: The command's config dataclass with defaults filled in.
    """
    if command not in COMMAND_CONFIGS:
        raise ConfigError(f"Unknown command '{command}'. Available: {sorted(COMMAND_CONFIGS)}")
    if not isinstance(payload, dict):
        raise ConfigError("Configuration must be a JSON object.")
    schema = COMMAND_CONFIGS[command]
    known = {f.name: f for f in fields(schema)}

    unknown = sorted(set(payload) - set(known))
    if unknown:
        logging.error(f"Unknown configuration keys for {command}: {unknown}")
        raise ConfigError(f"Unknown configuration keys for {command}: {unknown}")
    missing = sorted(name for name, f in known.items() if f.default is MISSING and f.default_factory is MISSING and name not in payload)
    if missing:
        logging.error(f"Missing required configuration keys for {command}: {missing}")
        raise ConfigError(f"Missing required configuration keys for {command}: {missing}")

    values = {name: _coerce(name, value, known[name].metadata) for name, value in payload.items()}
    return schema(**values)


def load_config(command: str, config_path: str) -> BaseRunConfig:
    try:
        with open(config_path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Configuration {config_path} is not valid JSON: {e}")
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {config_path}: {e}")
    config = parse_config(command, payload)
    logging.info(f"Loaded {command} configuration from {config_path}")
    return config
