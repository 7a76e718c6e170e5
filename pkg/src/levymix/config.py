"""Run configuration: a JSON tree with dotted-path overrides.

Schema (all sections optional except ``family`` and ``measure``)::

    {
      "family":   {"kind": "stable", "scale": 1.0},
      "measure":  {"kind": "dirac", "y": 0.5},
      "numerics": {"epsilon": 1e-4, "paths": 10000, "seed": 0, "horizon": 1.0,
                   "stream_stride": 4096, "inversion_nodes": 32,
                   "inversion_scale": 1.0, "workers": 0},
      "output":   {"dir": "levymix-out"},
      "<command>": {...command-specific grids...}
    }

``family.kind`` is a key of :data:`levymix.families.REGISTRY`; ``killed``
takes a nested ``base`` family. ``measure.kind`` is a key of
:data:`levymix.measures.REGISTRY`. Remaining keys are passed as keyword
arguments to the registry constructor.
"""

import copy
import hashlib
import json
import os

from . import families, measures
from .errors import ConfigError
from .mixing import MixedExponent
from .sampler import SimulationConfig
from .transforms import InversionConfig

ENV_OUTPUT_DIR = "LEVYMIX_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "levymix-out"
#: keys that do not influence any computed value and are left out of the hash
_UNHASHED = (("output",), ("numerics", "workers"))

NUMERIC_DEFAULTS = {
    "epsilon": 1e-4,
    "paths": 10000,
    "seed": 0,
    "horizon": 1.0,
    "stream_stride": 4096,
    "compensate": True,
    "inversion_nodes": 32,
    "inversion_scale": 1.0,
    "workers": 0,
}


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return doc


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, assignments):
    """Apply ``a.b.c=value`` assignments (values parsed as JSON when possible)."""
    doc = copy.deepcopy(doc)
    for item in assignments or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
            node = nxt
        node[parts[-1]] = _parse_value(raw)
    return doc


def config_hash(doc):
    """sha256 of the canonical JSON of ``doc`` without output-only keys."""
    doc = copy.deepcopy(doc)
    for path in _UNHASHED:
        node = doc
        for part in path[:-1]:
            node = node.get(part, {}) if isinstance(node, dict) else {}
        if isinstance(node, dict):
            node.pop(path[-1], None)
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def output_dir(doc, flag=None):
    """``--out`` flag, then ``output.dir``, then the environment, then the default."""
    return flag or doc.get("output", {}).get("dir") or os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR


def _kwargs(spec, what):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{what} must be an object with a 'kind' key")
    return spec["kind"], {k: v for k, v in spec.items() if k != "kind"}


def build_family(spec):
    kind, kw = _kwargs(spec, "family")
    if kind not in families.REGISTRY:
        raise ConfigError(f"unknown family {kind!r}; registry: {sorted(families.REGISTRY)}")
    if kind == "killed":
        if "base" not in kw:
            raise ConfigError("family 'killed' needs a nested 'base' family")
        kw["base"] = build_family(kw["base"])
    try:
        return families.REGISTRY[kind](**kw)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for family {kind!r}: {exc}") from exc


def build_measure(spec):
    kind, kw = _kwargs(spec, "measure")
    if kind not in measures.REGISTRY:
        raise ConfigError(f"unknown measure {kind!r}; registry: {sorted(measures.REGISTRY)}")
    try:
        return measures.REGISTRY[kind](**kw)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for measure {kind!r}: {exc}") from exc


def build_mixed(doc, strict=True):
    if "family" not in doc or "measure" not in doc:
        raise ConfigError("config needs 'family' and 'measure' sections")
    return MixedExponent(build_family(doc["family"]), build_measure(doc["measure"]), strict=strict)


def numerics(doc):
    extra = set(doc.get("numerics", {})) - set(NUMERIC_DEFAULTS)
    if extra:
        raise ConfigError(f"unknown numerics keys {sorted(extra)}")
    return {**NUMERIC_DEFAULTS, **doc.get("numerics", {})}


def simulation_config(doc):
    num = numerics(doc)
    try:
        return SimulationConfig(
            epsilon=float(num["epsilon"]),
            compensate_small_jumps=bool(num["compensate"]),
            horizon=float(num["horizon"]),
            path_count=int(num["paths"]),
            base_seed=int(num["seed"]),
            stream_stride=int(num["stream_stride"]),
            workers=int(num["workers"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def inversion_config(doc):
    num = numerics(doc)
    try:
        return InversionConfig(int(num["inversion_nodes"]), float(num["inversion_scale"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def section(doc, name, defaults):
    """Command section merged over ``defaults``; unknown keys are rejected."""
    sec = doc.get(name, {})
    extra = set(sec) - set(defaults)
    if extra:
        raise ConfigError(f"unknown keys in '{name}': {sorted(extra)}")
    return {**defaults, **sec}
