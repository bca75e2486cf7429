"""
Retargeting configuration and console logging

A RetargetConfig is a plain dict. Values come from the defaults, then an
optional JSON file, then command-line flags; validate_config checks the
result before any work starts.
"""

import json
import logging
import os
from typing import Any, List, Optional

from colorama import Fore, Style, init as colorama_init

from feature_network import build_tinyvgg

TAP_PRESETS = {
    "default": None,  # the network's own taps
}

WEIGHT_PRESETS = {
    "default": [1.0, 0.0, 0.0],
    "sweep-a": [0.5, 0.5, 0.0],
    "sweep-b": [0.33, 0.33, 0.33],
}

AXES = ("horizontal", "vertical")
INIT_MODES = ("linear", "seam", "noise")


class ConfigError(ValueError):
    """The resolved configuration violates an invariant"""


def create_retarget_config() -> dict[str, Any]:
    """
    Create a RetargetConfig with every default filled in

    Returns:
        A new configuration dict
    """
    return {
        "target_width": None,
        "width_fraction": 0.75,
        "axis": "horizontal",
        "taps": "default",
        "weights": "default",
        "alpha": 0.5,
        "percentile": 20.0,
        "cell_width": 16,
        "max_ratio": 0.5,
        "hierarchical": True,
        "learning_rate": 0.05,
        "iterations": 300,
        "refine_learning_rate": 0.05,
        "refine_iterations": 100,
        "grid_clamp": 2.0,
        "stop_window": 25,
        "stop_tolerance": 1e-4,
        "snapshot_every": 50,
        "snapshot_dir": None,
        "init_mode": "linear",
        "seed": 0,
        "weight_seed": 2019,
        "network": "tinyvgg",
        "score_tap": -1,
        "report_timings": False,
    }


def load_config_file(path: str) -> dict[str, Any]:
    """Read a JSON config file; unknown keys are rejected"""
    try:
        with open(path) as handle:
            values = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    unknown = sorted(set(values) - set(create_retarget_config()))
    if unknown:
        raise ConfigError(f"Config file {path} has unknown keys: {', '.join(unknown)}")
    return values


def merge_config(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Copy of base with every non-None override applied"""
    merged = dict(base)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


def resolve_weights(config: dict[str, Any], tap_count: int) -> List[float]:
    """Per-tap weights from a preset name or an explicit list"""
    weights = config["weights"]
    if isinstance(weights, str):
        if weights not in WEIGHT_PRESETS:
            raise ConfigError(f"Unknown weight preset '{weights}', expected one of {sorted(WEIGHT_PRESETS)}")
        weights = WEIGHT_PRESETS[weights]
        # presets are written for three taps; pad or cut to the tap count
        weights = (list(weights) + [0.0] * tap_count)[:tap_count]
    weights = [float(w) for w in weights]
    if len(weights) != tap_count:
        raise ConfigError(f"Got {len(weights)} weights for {tap_count} taps")
    return weights


def resolve_taps(config: dict[str, Any]) -> Optional[List[int]]:
    """Explicit tap layer indices, or None for the network's own taps"""
    taps = config["taps"]
    if isinstance(taps, str):
        if taps not in TAP_PRESETS:
            raise ConfigError(f"Unknown tap preset '{taps}', expected one of {sorted(TAP_PRESETS)}")
        return TAP_PRESETS[taps]
    return [int(t) for t in taps]


def resolve_target_width(config: dict[str, Any], width: int) -> int:
    """
    Final width w' for a source of the given width

    An absolute target_width wins over width_fraction; fractions round half up.
    """
    if config["target_width"] is not None:
        target = int(config["target_width"])
    else:
        target = int(config["width_fraction"] * width + 0.5)
    if not 0 < target <= width:
        raise ConfigError(f"Target width {target} must lie in (0, {width}]")
    return target


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def validate_config(config: dict[str, Any]) -> dict[str, Any]:
    """
    Check every RetargetConfig invariant

    Args:
        config: The resolved config

    Returns:
        The same config, for chaining

    Raises:
        ConfigError: Naming the first offending value
    """
    unknown = sorted(set(config) - set(create_retarget_config()))
    _require(not unknown, f"Unknown config keys: {', '.join(unknown)}")
    _require(config["axis"] in AXES, f"axis must be one of {AXES}, got '{config['axis']}'")
    _require(config["init_mode"] in INIT_MODES, f"init_mode must be one of {INIT_MODES}, got '{config['init_mode']}'")
    if config["target_width"] is None:
        fraction = config["width_fraction"]
        _require(0.0 < fraction <= 1.0, f"width_fraction must lie in (0, 1], got {fraction}")
    else:
        _require(int(config["target_width"]) > 0, f"target_width must be positive, got {config['target_width']}")
    _require(0.0 <= config["alpha"] < 1.0, f"alpha must lie in [0, 1), got {config['alpha']}")
    _require(0.0 < config["percentile"] <= 100.0, f"percentile must lie in (0, 100], got {config['percentile']}")
    _require(0.0 < config["max_ratio"] < 1.0, f"max_ratio must lie in (0, 1), got {config['max_ratio']}")
    _require(int(config["cell_width"]) >= 1, f"cell_width must be at least 1, got {config['cell_width']}")
    _require(config["learning_rate"] > 0, f"learning_rate must be positive, got {config['learning_rate']}")
    _require(config["refine_learning_rate"] > 0,
             f"refine_learning_rate must be positive, got {config['refine_learning_rate']}")
    _require(int(config["iterations"]) >= 0, f"iterations must be non-negative, got {config['iterations']}")
    _require(int(config["refine_iterations"]) >= 0,
             f"refine_iterations must be non-negative, got {config['refine_iterations']}")
    _require(config["grid_clamp"] >= 0, f"grid_clamp must be non-negative, got {config['grid_clamp']}")
    _require(int(config["stop_window"]) >= 1, f"stop_window must be at least 1, got {config['stop_window']}")

    weights = config["weights"]
    if isinstance(weights, str):
        _require(weights in WEIGHT_PRESETS, f"Unknown weight preset '{weights}'")
        weights = WEIGHT_PRESETS[weights]
    _require(all(w >= 0 for w in weights), f"weights must be non-negative, got {list(weights)}")
    _require(sum(weights) > 0, f"weights must have a positive sum, got {list(weights)}")

    reference = build_tinyvgg()
    taps = resolve_taps(config)
    if taps is not None:
        _require(len(taps) > 0, "taps must name at least one layer")
        _require(all(b > a for a, b in zip(taps, taps[1:])), f"taps must be strictly increasing, got {taps}")
        _require(all(0 <= t < len(reference.layers) for t in taps),
                 f"taps {taps} out of range for {len(reference.layers)} layers")
        if not isinstance(config["weights"], str):
            _require(len(config["weights"]) == len(taps), f"Got {len(config['weights'])} weights for {len(taps)} taps")
    tap_count = len(taps) if taps is not None else len(reference.taps)
    score_tap = int(config["score_tap"])
    _require(-tap_count <= score_tap < tap_count, f"score_tap {score_tap} out of range for {tap_count} taps")

    network = config["network"]
    _require(network == "tinyvgg" or os.path.isfile(network),
             f"network must be 'tinyvgg' or a DNRW file path, got '{network}'")
    return config


def config_to_json(config: dict[str, Any]) -> str:
    """Stable JSON rendering for --print-config"""
    return json.dumps(config, indent=2, sort_keys=True)


class ColorFormatter(logging.Formatter):
    """Console formatter colouring the level name"""

    COLORS = {
        logging.DEBUG: Style.DIM,
        logging.INFO: Fore.CYAN,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Fore.RED + Style.BRIGHT,
    }

    def format(self, record: logging.LogRecord) -> str:
        color = self.COLORS.get(record.levelno, "")
        message = super().format(record)
        return f"{color}{record.levelname.lower()}{Style.RESET_ALL} {message}"


def configure_logging(verbosity: int = 0, quiet: bool = False) -> None:
    """
    Install the coloured console handler on the root logger

    Args:
        verbosity: 0 for warnings, 1 for info, 2 or more for debug
        quiet: Only errors
    """
    colorama_init()
    if quiet:
        level = logging.ERROR
    else:
        level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    handler = logging.StreamHandler()
    handler.setFormatter(ColorFormatter("%(name)s: %(message)s"))
    root = logging.getLogger()
    for existing in list(root.handlers):
        if isinstance(existing.formatter, ColorFormatter):
            root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(level)
