"""Experiment configuration: a flat ``key = value`` format and its JSON twin.

Grammar of the text form::

    # comment (also after a value)
    experiment = edge-prob
    seed = 7
    model.k = 0.25
    sweep = 0.05, 0.1, 0.2

One assignment per line; dotted keys address sections (``model``,
``integrator``, ``probe``).  Lists are comma separated.  The JSON form holds
the same keys, either dotted at top level or nested one level by section.
Unknown and duplicate keys are errors.

``sweep`` lists the values of the quantity named by ``probe.sweep_over``:
radii ``r``, window lengths ``t2 - t1`` (``t2``, starting at ``probe.t1``),
box sizes ``delta`` or multiplicities ``k``.
"""

import json
import math
import re
from dataclasses import dataclass, field, fields
from enum import Enum

from .model import ModelParams, RootSystem
from .sde import IntegratorConfig, Scheme


class Experiment(str, Enum):
    SIMULATE = "simulate"
    EDGE_PROB = "edge-prob"
    OCCUPATION = "occupation"
    WINDOW_HIT = "window-hit"
    JOINT_PROB = "joint-prob"
    SELFSIM = "selfsim"
    DIMENSION = "dimension"
    ORACLE_CHECK = "oracle-check"


# experiments whose purpose is an exponent fit and that therefore need a sweep
FITTING = {Experiment.EDGE_PROB, Experiment.OCCUPATION, Experiment.WINDOW_HIT,
           Experiment.JOINT_PROB}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` and ``line`` locate the problem."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(key)
        prefix = ": ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class ProbeSettings:
    """Experiment-specific parameters (the ``probe.`` section)."""

    t: float = 1.0
    horizon: float = 1.0
    r: float = 0.05
    t1: float = 0.5
    t2: float = 1.0
    s1: float = 0.5
    s2: float = 1.0
    c: float = 2.0
    statistic: str = "norm"
    coupling_c: float = 1.0
    window_start: float = 0.1
    x0: tuple | None = None
    sweep_over: str = "r"
    zero_drift: bool = False
    path_index: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    root_system: RootSystem = RootSystem.A
    n_particles: int = 2
    k: float | None = None
    alpha: float | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    probe: ProbeSettings = field(default_factory=ProbeSettings)
    sweep: tuple = ()
    n_samples: int = 10_000
    seed: int = 0
    threads: int | None = None
    output_path: str | None = None
    output_format: str = "csv"

    @property
    def params(self):
        return ModelParams(self.root_system, self.n_particles, self.k, self.alpha)


# key -> value kind; the kind drives parsing and serialization
_TOP = {
    "experiment": "experiment",
    "n_samples": "int",
    "seed": "u64",
    "threads": "int?",
    "output_path": "str?",
    "output_format": "format",
    "sweep": "floats",
}
_MODEL = {
    "model.root_system": "root",
    "model.n_particles": "int",
    "model.k": "float?",
    "model.alpha": "float?",
}
_INTEGRATOR = {
    "integrator.dt_max": "float",
    "integrator.gap_safety": "float",
    "integrator.r_floor": "float",
    "integrator.ball_radius": "float",
    "integrator.scheme": "scheme",
    "integrator.record_spacing": "float",
}
_PROBE = {
    "probe.t": "float",
    "probe.horizon": "float",
    "probe.r": "float",
    "probe.t1": "float",
    "probe.t2": "float",
    "probe.s1": "float",
    "probe.s2": "float",
    "probe.c": "float",
    "probe.statistic": "statistic",
    "probe.coupling_c": "float",
    "probe.window_start": "float",
    "probe.x0": "floats?",
    "probe.sweep_over": "sweep_over",
    "probe.zero_drift": "bool",
    "probe.path_index": "int",
}
KEYS = {**_TOP, **_MODEL, **_INTEGRATOR, **_PROBE}
SWEEP_OVER = ("r", "t2", "delta", "k")


def _convert(key, kind, raw, line=None):
    """Convert a raw value (text or JSON scalar/list) to the typed value."""
    def fail(msg):
        raise ConfigError(msg, key, line)

    optional = kind.endswith("?")
    base = kind.rstrip("?")
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none", "null")):
        if optional:
            return None
        fail("a value is required")
    try:
        if base == "float":
            v = float(raw)
            if math.isnan(v):
                fail("must not be NaN")
            return v
        if base in ("int", "u64"):
            if isinstance(raw, float) and not raw.is_integer():
                fail("must be an integer")
            v = int(str(raw).strip(), 0) if isinstance(raw, str) else int(raw)
            if base == "u64" and not 0 <= v < 2**64:
                fail("must be an unsigned 64-bit integer")
            return v
        if base == "str":
            return str(raw).strip()
        if base == "bool":
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("true", "yes", "1", "on"):
                return True
            if s in ("false", "no", "0", "off"):
                return False
            fail(f"expected a boolean, got {raw!r}")
        if base == "floats":
            items = raw if isinstance(raw, (list, tuple)) else [
                s for s in str(raw).split(",") if s.strip()]
            out = []
            for item in items:
                v = float(item)
                if math.isnan(v):
                    fail("must not contain NaN")
                out.append(v)
            return tuple(out)
        if base == "experiment":
            return Experiment(str(raw).strip())
        if base == "root":
            return RootSystem.parse(str(raw).strip())
        if base == "scheme":
            return Scheme(str(raw).strip().lower())
        if base == "format":
            s = str(raw).strip().lower()
            if s not in ("csv", "json"):
                fail("must be csv or json")
            return s
        if base == "statistic":
            s = str(raw).strip()
            if s not in ("norm", "edge_distance"):
                fail("must be norm or edge_distance")
            return s
        if base == "sweep_over":
            s = str(raw).strip()
            if s not in SWEEP_OVER:
                fail(f"must be one of {', '.join(SWEEP_OVER)}")
            return s
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        fail(f"cannot parse {raw!r} ({exc})")
    raise AssertionError(kind)


_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")


def _parse_text(text):
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = m.group(1), m.group(2)
        if key not in KEYS:
            raise ConfigError("unknown key", key, lineno)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key, lineno)
        values[key] = value
        lines[key] = lineno
    return values, lines


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError("duplicate key", key)
        out[key] = value
    return out


def _parse_json(text):
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg})", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("JSON config must be an object")
    values = {}
    for key, value in data.items():
        if isinstance(value, dict) and key in ("model", "integrator", "probe"):
            for sub, v in value.items():
                full = f"{key}.{sub}"
                if full in values:
                    raise ConfigError("duplicate key", full)
                values[full] = v
        else:
            if key in values:
                raise ConfigError("duplicate key", key)
            values[key] = value
    for key in values:
        if key not in KEYS:
            raise ConfigError("unknown key", key)
    return values, {}


def parse_values(text):
    """Raw ``{key: value}`` from a config text (JSON if it starts with ``{``)."""
    if text.lstrip().startswith("{"):
        return _parse_json(text)
    return _parse_text(text)


def build_config(values, lines=None):
    """Typed, validated :class:`ExperimentConfig` from raw key values."""
    lines = lines or {}
    typed = {key: _convert(key, KEYS[key], v, lines.get(key)) for key, v in values.items()}
    if "experiment" not in typed:
        raise ConfigError("missing required key", "experiment")
    integ = {}
    probe = {}
    top = {}
    for key, v in typed.items():
        if key.startswith("integrator."):
            integ[key.split(".", 1)[1]] = v
        elif key.startswith("probe."):
            probe[key.split(".", 1)[1]] = v
        elif key.startswith("model."):
            top[key.split(".", 1)[1]] = v
        else:
            top[key] = v
    try:
        integrator = IntegratorConfig(**integ)
    except ValueError as exc:
        name = str(exc).split(" ", 1)[0]
        key = f"integrator.{name}"
        raise ConfigError(str(exc), key if key in KEYS else None,
                          lines.get(key)) from None
    cfg = ExperimentConfig(integrator=integrator, probe=ProbeSettings(**probe), **top)
    validate(cfg, lines)
    return cfg


def validate(cfg, lines=None):
    """Check every field against the domain of the module it feeds."""
    lines = lines or {}

    def fail(key, msg):
        raise ConfigError(msg, key, lines.get(key))

    if cfg.k is None:
        fail("model.k", "a value is required")
    if not cfg.k > 0 or math.isinf(cfg.k):
        fail("model.k", f"must be positive and finite, got {cfg.k}")
    if cfg.root_system is RootSystem.B:
        if cfg.alpha is None:
            fail("model.alpha", "is required for root system B")
        if not cfg.alpha > 0 or math.isinf(cfg.alpha):
            fail("model.alpha", f"must be positive and finite, got {cfg.alpha}")
        if cfg.n_particles < 1:
            fail("model.n_particles", "must be at least 1 for root system B")
    else:
        if cfg.alpha is not None:
            fail("model.alpha", "only applies to root system B")
        if cfg.n_particles < 2:
            fail("model.n_particles", "must be at least 2 for root system A")
    if cfg.n_samples < 1:
        fail("n_samples", "must be positive")
    if cfg.threads is not None and cfg.threads < 1:
        fail("threads", "must be positive")
    p = cfg.probe
    for name in ("t", "horizon", "r", "t1", "t2", "s1", "s2", "c", "coupling_c"):
        v = getattr(p, name)
        if not v > 0 or math.isinf(v):
            fail(f"probe.{name}", f"must be positive and finite, got {v}")
    if p.window_start < 0:
        fail("probe.window_start", "must be nonnegative")
    if p.t2 < p.t1:
        fail("probe.t2", "must be >= probe.t1")
    if p.s2 < p.s1:
        fail("probe.s2", "must be >= probe.s1")
    if cfg.experiment is Experiment.DIMENSION and p.window_start >= p.horizon:
        fail("probe.window_start", "must be smaller than probe.horizon")
    if p.path_index < 0:
        fail("probe.path_index", "must be nonnegative")
    if p.x0 is not None and len(p.x0) != cfg.n_particles:
        fail("probe.x0", f"needs {cfg.n_particles} coordinates")
    if p.x0 is not None:
        x = p.x0
        if any(b < a for a, b in zip(x, x[1:])) or (cfg.root_system is RootSystem.B and x[0] < 0):
            fail("probe.x0", "must lie in the closed chamber")
    if cfg.sweep:
        if p.sweep_over == "k":
            bad = [v for v in cfg.sweep if not v > 0]
        else:
            bad = [v for v in cfg.sweep if not (v > 0 and math.isfinite(v))]
        if bad:
            fail("sweep", f"values must be positive, got {bad[0]}")
    if cfg.experiment in FITTING and len(cfg.sweep) < 2:
        fail("sweep", "needs at least two values for an exponent fit")
    if cfg.experiment is Experiment.DIMENSION and p.sweep_over not in ("delta", "k"):
        if cfg.sweep:
            fail("probe.sweep_over", "must be delta or k for the dimension experiment")
    if cfg.experiment is Experiment.WINDOW_HIT and p.sweep_over not in ("r", "t2"):
        fail("probe.sweep_over", "must be r or t2 for the window-hit experiment")
    if cfg.experiment is Experiment.ORACLE_CHECK:
        ok = ((cfg.root_system is RootSystem.A and cfg.n_particles == 2)
              or (cfg.root_system is RootSystem.B and cfg.n_particles == 1))
        if not ok:
            fail("model.n_particles", "oracle-check needs type A with N = 2 or type B with N = 1")
    try:
        cfg.params
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_config(text, overrides=None):
    """Parse a config text; ``overrides`` (raw key values) win over the file."""
    values, lines = parse_values(text)
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError("unknown key", key)
        values[key] = value
        lines.pop(key, None)
    return build_config(values, lines)


def _format_value(kind, v):
    base = kind.rstrip("?")
    if v is None:
        return "none"
    if isinstance(v, Enum):
        return v.value
    if base == "float":
        return repr(float(v)) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    if base == "floats":
        return ", ".join(repr(float(x)) for x in v)
    if base == "bool":
        return "true" if v else "false"
    return str(v)


def config_values(cfg):
    """Fully resolved ``{key: typed value}`` of a config."""
    out = {
        "experiment": cfg.experiment,
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "output_path": cfg.output_path,
        "output_format": cfg.output_format,
        "sweep": tuple(cfg.sweep),
        "model.root_system": cfg.root_system,
        "model.n_particles": cfg.n_particles,
        "model.k": cfg.k,
        "model.alpha": cfg.alpha,
    }
    for f in fields(IntegratorConfig):
        out[f"integrator.{f.name}"] = getattr(cfg.integrator, f.name)
    for f in fields(ProbeSettings):
        out[f"probe.{f.name}"] = getattr(cfg.probe, f.name)
    return out


def serialize(cfg):
    """Text form of ``cfg``; ``parse_config(serialize(cfg)) == cfg``."""
    lines = []
    for key, v in config_values(cfg).items():
        if v is None or (key == "sweep" and not v):
            continue
        lines.append(f"{key} = {_format_value(KEYS[key], v)}")
    return "\n".join(lines) + "\n"


def to_json_dict(cfg):
    """Nested JSON-friendly dict (the ``meta`` block of result files)."""
    out = {}
    for key, v in config_values(cfg).items():
        if isinstance(v, Enum):
            v = v.value
        elif isinstance(v, tuple):
            v = list(v)
        elif isinstance(v, float) and math.isinf(v):
            v = "inf" if v > 0 else "-inf"
        if "." in key:
            sec, sub = key.split(".", 1)
            out.setdefault(sec, {})[sub] = v
        else:
            out[key] = v
    return out
