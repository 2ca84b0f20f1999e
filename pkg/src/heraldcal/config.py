"""YAML run configuration: schema, defaults, canonical hash, builders.

The schema is walked by hand so an unknown or misspelled key fails with
its full dotted path instead of being silently ignored, which is the
failure mode that actually bites in long acquisition campaigns.
"""

import hashlib
import json

import yaml

from .coincidence import CoincConfig
from .errors import ConfigError
from .streams import DetectorChannel, SimSeed, SourceParams

_REQUIRED = object()

_CHANNEL = {
    "t_chan": (float, 1.0),
    "eta_d": (float, 1.0),
    "dark_rate_hz": (float, 0.0),
    "jitter_sigma_s": (float, 300e-12),
    "pulse_width_s": (float, 20e-9),
    "dead_time_s": (float, 0.0),
    "delay_s": (float, 0.0),
}

def _channel_schema(delay_default):
    sch = dict(_CHANNEL)
    sch["delay_s"] = (float, delay_default)
    return sch


SCHEMA = {
    "source": {
        "r": (float, _REQUIRED),
        "mode_rate_hz": (float, 1.0e7),
        "background_rate_per_arm_hz": (float, 0.0),
    },
    # ch2/ch3 default to one clock cycle of cable delay so the true
    # coincidence peak lands inside the acceptance window instead of on
    # its leading edge, where timing jitter leaks events out of the gate
    "channels": {
        "ch1": _channel_schema(0.0),
        "ch2": _channel_schema(10e-9),
        "ch3": _channel_schema(10e-9),
    },
    "coincidence": {
        "clock_s": (float, 10e-9),
        "rel_delay_s": (float, 10e-9),
        "window_cw_s": (float, 30e-9),
        "pulse_width_w2_s": (float, 20e-9),
        "far_delay_s": (float, 300e-9),
    },
    "run": {
        "duration_s": (float, 1.0),
        "seed": (int, 12345),
        "chunk_seconds": (float, 1.0),
        "n_workers": (int, 1),
        "split": (float, 0.5),
    },
    "sweep": {
        "dac": (list, (1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0)),
        "duration_per_point_s": (float, 1.0),
        "mu": (float, 0.115),
    },
    "output_dir": (str, ""),
}


def _coerce(value, typ, path):
    # YAML booleans are ints in python; reject them for numeric fields
    if isinstance(value, bool):
        raise ConfigError(f"{path}: expected {typ.__name__}, got boolean")
    if typ is float and isinstance(value, (int, float)):
        return float(value)
    if typ is float and isinstance(value, str):
        # YAML 1.1 reads exponent-without-sign floats like 5.0e5 as strings
        try:
            return float(value)
        except ValueError:
            pass
    if typ is int and isinstance(value, int):
        return value
    if typ is str and isinstance(value, str):
        return value
    if typ is list:
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(f"{path}: expected a non-empty list of numbers")
        return [_coerce(v, float, f"{path}[{i}]") for i, v in enumerate(value)]
    raise ConfigError(f"{path}: expected {typ.__name__}, got {type(value).__name__}")


def _walk(schema, data, path=""):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"unknown config key: {where}")
    out = {}
    for key, spec in schema.items():
        here = f"{path}.{key}" if path else key
        if isinstance(spec, dict):
            out[key] = _walk(spec, data.get(key, {}), here)
        else:
            typ, default = spec
            if key in data:
                out[key] = _coerce(data[key], typ, here)
            elif default is _REQUIRED:
                raise ConfigError(f"missing required config key: {here}")
            else:
                # fresh list per call; a shared default would alias mutations
                out[key] = list(default) if typ is list else default
    return out


def validate_config(raw):
    """Raw mapping -> fully defaulted config dict (or ConfigError)."""
    return _walk(SCHEMA, raw if raw is not None else {})


def config_hash(cfg):
    """sha256 over the canonical JSON form of the validated config."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def load_config(path):
    """Read, validate and hash a YAML config file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: not valid YAML: {err}") from None
    cfg = validate_config(raw)
    return cfg, config_hash(cfg)


def build_source(cfg):
    s = cfg["source"]
    return SourceParams(
        r=s["r"],
        mode_rate_hz=s["mode_rate_hz"],
        background_rate_per_arm=s["background_rate_per_arm_hz"],
        duration_s=cfg["run"]["duration_s"],
    )


def build_channel(cfg, name):
    if name not in cfg["channels"]:
        raise ConfigError(f"no channel named {name!r} in config")
    return DetectorChannel(**cfg["channels"][name])


def build_coincidence(cfg):
    c = cfg["coincidence"]
    return CoincConfig(
        clock_period_s=c["clock_s"],
        rel_delay_s=c["rel_delay_s"],
        window_cw_s=c["window_cw_s"],
        pulse_width_w2_s=c["pulse_width_w2_s"],
        far_delay_s=c["far_delay_s"],
    )


def build_seed(cfg):
    return SimSeed(
        master_seed=cfg["run"]["seed"],
        chunk_seconds=cfg["run"]["chunk_seconds"],
    )
