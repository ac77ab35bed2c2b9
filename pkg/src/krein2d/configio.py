"""JSON configuration files.

Layout::

    {"model": {"kind": "flat" | "hyperbolic" | "generic", ...},
     "constants": {"hbar": 1.0, "mass": 0.5},
     "d_min": 1.0,
     "centers": [{"x": 0.0, "y": 0.0, "mu": 1.0}, ...]}

Parsing is strict: unknown keys are rejected so that a misspelled physical
constant cannot silently fall back to a default.  Coordinates are written
with 17 significant digits, which round-trips every double exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, KreinError
from .geometry import NATURAL, Configuration, Flat, GenericBounds, Hyperbolic, ManifoldModel, PhysicalConstants

_MODEL_KEYS = {
    "flat": {"kind", "A", "B"},
    "hyperbolic": {"kind", "kappa", "A", "B"},
    "generic": {"kind", "kappa", "A", "B", "C", "D", "rho", "n_star", "lambda_gap"},
}
_TOP_KEYS = {"model", "constants", "d_min", "centers"}
_CENTER_KEYS = {"x", "y", "mu"}


class ParsedConfig(NamedTuple):
    model: ManifoldModel
    config: Optional[Configuration]
    constants: PhysicalConstants


@dataclass(frozen=True)
class ConfigDocument:
    """Everything a configuration file carries.

    ``config`` is None for generic models, which have no coordinates.
    ``A`` and ``B`` are the Gaussian heat-kernel bound constants when given.
    """

    model: ManifoldModel
    config: Optional[Configuration]
    constants: PhysicalConstants
    d_min: float
    A: Optional[float] = None
    B: Optional[float] = None


def _number(value, where, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{where}: expected a number, got {value!r}")
    if integer and not isinstance(value, int):
        raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigurationError(f"{where}: expected a finite number")
    return value if integer else float(value)


def _object(value, where, allowed, required=()):
    if not isinstance(value, dict):
        raise ConfigurationError(f"{where}: expected an object")
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise ConfigurationError(f"{where}: unknown key {unknown[0]!r}")
    for key in required:
        if key not in value:
            raise ConfigurationError(f"{where}: missing key {key!r}")
    return value


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigurationError(f"duplicate key {key!r}")
        out[key] = value
    return out


def _model_from(doc):
    m = doc.get("model")
    if not isinstance(m, dict) or m.get("kind") not in _MODEL_KEYS:
        raise ConfigurationError("model.kind: must be one of 'flat', 'hyperbolic', 'generic'")
    kind = m["kind"]
    _object(m, "model", _MODEL_KEYS[kind], ("kappa",) if kind == "hyperbolic" else ())
    nums = {k: _number(v, f"model.{k}", integer=(k == "n_star")) for k, v in m.items() if k != "kind"}
    try:
        if kind == "flat":
            model = Flat()
        elif kind == "hyperbolic":
            model = Hyperbolic(nums["kappa"])
        else:
            model = GenericBounds(**nums)
    except KreinError as exc:
        raise ConfigurationError(f"model: {exc}") from None
    return model, nums.get("A"), nums.get("B")


def loads_config(text: str) -> ConfigDocument:
    """Parse and validate the text of a configuration file."""
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _object(doc, "document", _TOP_KEYS, ("model", "d_min"))
    model, A, B = _model_from(doc)
    constants = NATURAL
    if "constants" in doc:
        c = _object(doc["constants"], "constants", {"hbar", "mass"}, ("hbar", "mass"))
        try:
            constants = PhysicalConstants(_number(c["hbar"], "constants.hbar"),
                                          _number(c["mass"], "constants.mass"))
        except KreinError as exc:
            raise ConfigurationError(f"constants: {exc}") from None
    d_min = _number(doc["d_min"], "d_min")
    if isinstance(model, GenericBounds):
        if doc.get("centers"):
            raise ConfigurationError("centers: a generic model carries no coordinates")
        if not d_min > 0:
            raise ConfigurationError("d_min: must be positive")
        return ConfigDocument(model, None, constants, d_min, A, B)
    centers = doc.get("centers")
    if not isinstance(centers, list) or not centers:
        raise ConfigurationError("centers: expected a non-empty list")
    pts = np.empty((len(centers), 2))
    mus = np.empty(len(centers))
    for i, c in enumerate(centers):
        where = f"centers[{i}]"
        _object(c, where, _CENTER_KEYS, ("x", "y", "mu"))
        pts[i] = (_number(c["x"], where + ".x"), _number(c["y"], where + ".y"))
        mus[i] = _number(c["mu"], where + ".mu")
    try:
        config = Configuration(model, pts, mus, d_min, constants)
    except KreinError as exc:
        raise type(exc)(f"centers: {exc}") from None
    return ConfigDocument(model, config, constants, d_min, A, B)


def read_config(path) -> ConfigDocument:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror}") from None
    try:
        return loads_config(text)
    except KreinError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def parse_config_file(path) -> ParsedConfig:
    """Read a configuration file and return ``(model, configuration, constants)``.

    Raises
    ------
    ConfigurationError
        Malformed JSON (with line and column), unknown or missing keys, or a
        violated invariant such as two centers closer than ``d_min``.
    DomainError
        A hyperbolic center outside the open unit disk.
    """
    doc = read_config(path)
    return ParsedConfig(doc.model, doc.config, doc.constants)


def _fmt(x: float) -> str:
    s = format(float(x), ".17g")
    return s if any(ch in s for ch in ".en") else s + ".0"


def dumps_config(config: Configuration, A: Optional[float] = None, B: Optional[float] = None) -> str:
    """Serialize a configuration; one center per line."""
    model = {"kind": config.model.kind}
    if isinstance(config.model, Hyperbolic):
        model["kappa"] = config.model.kappa
    if A is not None:
        model["A"] = A
    if B is not None:
        model["B"] = B
    model_txt = ", ".join(f'"{k}": ' + (json.dumps(v) if isinstance(v, str) else _fmt(v))
                          for k, v in model.items())
    k = config.constants
    lines = [
        "{",
        f'  "model": {{{model_txt}}},',
        f'  "constants": {{"hbar": {_fmt(k.hbar)}, "mass": {_fmt(k.mass)}}},',
        f'  "d_min": {_fmt(config.d_min)},',
        '  "centers": [',
    ]
    rows = [f'    {{"x": {_fmt(p[0])}, "y": {_fmt(p[1])}, "mu": {_fmt(m)}}}'
            for p, m in zip(config.points, config.mus)]
    lines.append(",\n".join(rows))
    lines += ["  ]", "}", ""]
    return "\n".join(lines)


def write_config_file(path, config: Configuration, A: Optional[float] = None,
                      B: Optional[float] = None) -> None:
    Path(path).write_text(dumps_config(config, A, B), encoding="utf-8")
