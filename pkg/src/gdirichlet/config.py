"""JSON configuration objects for weights, approximation functions and matrices."""

from __future__ import annotations

import json
import math
import os
from fractions import Fraction

import numpy as np

from .errors import ConfigError, GDirichletError
from .weights import (
    ArgScaled,
    DirichletExponent,
    DualApprox,
    Power,
    PowerLog,
    PowerLogDecay,
    PiecewiseLinearLog,
    ProductWeight,
    Scaled,
    ScaledPower,
    ScaledWeight,
    StepFunction,
    TabulatedApprox,
    TabulatedPiecewiseLinear,
    WeightSystem,
)


def load_json(source):
    """A dict from a dict, an inline JSON string, or a path to a JSON file."""
    if isinstance(source, dict):
        return source
    if not isinstance(source, str):
        raise ConfigError(f"cannot read configuration from {type(source).__name__}")
    text = source.strip()
    if text.startswith("{") or text.startswith("["):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid inline JSON: {exc}") from None
    if not os.path.exists(source):
        raise ConfigError(f"configuration file not found: {source}")
    with open(source) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {source}: {exc}") from None


def _need(cfg, key):
    try:
        return cfg[key]
    except (KeyError, TypeError):
        raise ConfigError(f"missing key {key!r} in {cfg!r}") from None


def parse_weight_function(cfg):
    if isinstance(cfg, (int, float)):
        return Power(cfg)
    kind = _need(cfg, "kind")
    try:
        if kind == "power":
            return Power(_need(cfg, "rho"))
        if kind == "powerlog":
            return PowerLog(_need(cfg, "a"), cfg.get("onset", math.e ** 2))
        if kind == "plog":
            return PiecewiseLinearLog(_need(cfg, "base"), _need(cfg, "slopes"),
                                      cfg.get("anchor", 1.0), cfg.get("value"))
        if kind == "table":
            return TabulatedPiecewiseLinear(_need(cfg, "nodes"))
        if kind == "product":
            return ProductWeight([parse_weight_function(f) for f in _need(cfg, "factors")])
        if kind == "scaled_weight":
            return ScaledWeight(parse_weight_function(_need(cfg, "h")), _need(cfg, "c"))
    except GDirichletError as exc:
        raise ConfigError(f"invalid weight function {cfg!r}: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"invalid weight function {cfg!r}: {exc}") from None
    raise ConfigError(f"unknown weight function kind {kind!r}")


def parse_weights(cfg) -> WeightSystem:
    """Accepts ``{"alpha": [...], "beta": [...]}``, ``{"rho": [...], "sigma": [...]}``
    or ``{"example": "changing-weights"}``."""
    cfg = load_json(cfg)
    if "example" in cfg:
        if cfg["example"] == "changing-weights":
            return WeightSystem.changing_weights()
        raise ConfigError(f"unknown weights example {cfg['example']!r}")
    try:
        if "rho" in cfg:
            return WeightSystem.powers(cfg["rho"], _need(cfg, "sigma"))
        alpha = [parse_weight_function(a) for a in _need(cfg, "alpha")]
        beta = [parse_weight_function(b) for b in _need(cfg, "beta")]
        return WeightSystem(alpha, beta)
    except ConfigError:
        raise
    except GDirichletError as exc:
        raise ConfigError(f"invalid weights: {exc}") from None


def parse_approx(cfg, ws: WeightSystem | None = None):
    """Approximation functions; ``{"kind": "dirichlet"}`` uses ``ws`` unless weights are given."""
    cfg = load_json(cfg)
    kind = _need(cfg, "kind")
    try:
        if kind == "f1":
            return ScaledPower(1.0, 1.0)
        if kind == "scaled_power":
            return ScaledPower(cfg.get("b", 1.0), cfg.get("a", 1.0))
        if kind == "powerlog_decay":
            return PowerLogDecay(cfg.get("c", 1.0), cfg.get("a", 1.0), cfg.get("b", 0.0),
                                 cfg.get("e", 0.0), cfg.get("onset"))
        if kind == "table":
            return TabulatedApprox(_need(cfg, "nodes"))
        if kind == "step":
            return StepFunction(_need(cfg, "jumps"), _need(cfg, "values"))
        if kind == "scaled":
            return Scaled(_need(cfg, "c"), parse_approx(_need(cfg, "g"), ws))
        if kind == "arg_scaled":
            return ArgScaled(_need(cfg, "eps"), parse_approx(_need(cfg, "g"), ws))
        if kind == "dual":
            return DualApprox(parse_approx(_need(cfg, "f"), ws))
        if kind == "dirichlet":
            w = parse_weights(cfg["weights"]) if "weights" in cfg else ws
            if w is None:
                raise ConfigError("dirichlet exponent needs weights")
            return DirichletExponent(w)
    except ConfigError:
        raise
    except GDirichletError as exc:
        raise ConfigError(f"invalid approximation function {cfg!r}: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"invalid approximation function {cfg!r}: {exc}") from None
    raise ConfigError(f"unknown approximation function kind {kind!r}")


def parse_matrix(text: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Inline CSV (rows separated by ``;``), a CSV file, or ``golden``/``liouville``."""
    from .badapprox import golden_theta, liouville_theta
    if text == "golden":
        mat = np.array([[golden_theta()]])
    elif text == "liouville":
        mat = np.array([[float(liouville_theta(3))]])
    elif os.path.exists(text):
        try:
            mat = np.atleast_2d(np.loadtxt(text, delimiter=",", ndmin=2))
        except ValueError as exc:
            raise ConfigError(f"cannot parse matrix file {text}: {exc}") from None
    else:
        try:
            rows = [[float(Fraction(v.strip())) for v in r.split(",")]
                    for r in text.split(";") if r.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse matrix {text!r}") from None
        if not rows or len({len(r) for r in rows}) != 1:
            raise ConfigError(f"ragged or empty matrix {text!r}")
        mat = np.array(rows)
    if shape is not None and mat.shape != tuple(shape):
        if mat.size == shape[0] * shape[1]:
            mat = mat.reshape(shape)
        else:
            raise ConfigError(f"matrix has shape {mat.shape}, expected {tuple(shape)}")
    return mat


def parse_vector(text: str | None, n: int) -> np.ndarray:
    if text is None:
        return np.zeros(n)
    vals = parse_matrix(text).ravel()
    if vals.size != n:
        raise ConfigError(f"vector has {vals.size} entries, expected {n}")
    return vals
