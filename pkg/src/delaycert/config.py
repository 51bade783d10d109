"""Run configuration: strict JSON schema validation and translation into a SystemSpec."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any, List, Optional, Tuple

import jsonschema
import numpy as np

from .delays import make_delay, make_kernel, make_time_profile
from .errors import ConfigurationError
from .models import (Feedback, MemoryKernel, WaveMemoryParams, build_damped_wave, build_plate, build_scalar,
                     build_wave_memory, nodes, nonlinearity_catalog)
from .quadrature import QuadConfig
from .system import SystemSpec

DEFAULT_SOLVER = {"tol": 1e-10, "max_iter": 200, "initial": "semigroup", "omega_prime": None}


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("delaycert").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def validate_config(cfg: Any) -> dict:
    validator = jsonschema.Draft202012Validator(load_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(cfg))
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {where}: {err.message}")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(cfg)


# ------------------------------------------------------------------ parameter paths

def _walk(cfg, parts: List[str]):
    node = cfg
    for part in parts:
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                return None, False
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            return None, False
    return node, True


def set_path(cfg: dict, path: str, value: float) -> dict:
    """Copy of ``cfg`` with the numeric field at dotted ``path`` (list indices as integers) replaced."""
    parts = path.split(".")
    current, found = _walk(cfg, parts)
    if not found:
        raise ConfigurationError(f"sweep path {path!r} does not address a config field")
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigurationError(f"sweep path {path!r} addresses a non-numeric field")
    out = copy.deepcopy(cfg)
    parent, _ = _walk(out, parts[:-1])
    key = parts[-1]
    if isinstance(parent, list):
        parent[int(key)] = value
    else:
        parent[key] = value
    return validate_config(out)


# ------------------------------------------------------------------ pieces

def field_profile(spec: Optional[dict], n: int) -> np.ndarray:
    x = nodes(n)
    if spec is None or spec["kind"] == "zero":
        return np.zeros(n)
    kind = spec["kind"]
    if kind == "sine":
        return spec.get("amp", 1.0) * np.sin(spec.get("mode", 1) * math.pi * x)
    if kind == "bump":
        c, w = spec.get("center", 0.5), spec.get("width", 0.1)
        return spec.get("amp", 1.0) * np.exp(-((x - c) / w) ** 2)
    vals = np.asarray(spec["values"], dtype=float)
    if vals.shape != (n,):
        raise ConfigurationError(f"field 'values' has {vals.size} entries, expected {n}")
    return vals


def quad_config(cfg: dict) -> QuadConfig:
    c = cfg.get("certificate", {})
    base = QuadConfig()
    return QuadConfig(rel_tol=c.get("rel_tol", base.rel_tol), abs_tol=c.get("abs_tol", base.abs_tol),
                      max_panels=c.get("max_panels", base.max_panels), tail_tol=c.get("tail_tol", base.tail_tol))


@dataclass(frozen=True)
class SolverSettings:
    T: float
    dt: float
    tol: float
    max_iter: int
    initial: str
    omega_prime: Optional[float]
    fit_window: Tuple[float, float]


def solver_settings(cfg: dict) -> SolverSettings:
    if "solver" not in cfg:
        raise ConfigurationError("config has no 'solver' section")
    s = {**DEFAULT_SOLVER, **cfg["solver"]}
    window = cfg.get("analysis", {}).get("fit_window", [0.5 * s["T"], s["T"]])
    return SolverSettings(float(s["T"]), float(s["dt"]), float(s["tol"]), int(s["max_iter"]), s["initial"],
                          s["omega_prime"], (float(window[0]), float(window[1])))


def _feedback(ch: dict, pde: bool) -> Feedback:
    if pde and "b" in ch:
        raise ConfigurationError("PDE channels take a 'region', not a scalar 'b'")
    if not pde and "region" in ch:
        raise ConfigurationError("scalar channels take 'b', not a 'region'")
    if pde and not ch.get("region"):
        raise ConfigurationError("PDE channels need a non-empty 'region'")
    delay = make_delay(ch["delay"], ch.get("c"))
    kernel = make_kernel(ch["kernel"])
    profile = make_time_profile(ch.get("history", {"kind": "constant", "value": 1.0}))
    return Feedback(delay, kernel, profile, region=tuple(ch.get("region", ())), b=float(ch.get("b", 1.0)),
                    op_norm_b=ch.get("op_norm_b"))


def build_system(cfg: dict) -> SystemSpec:
    model = cfg["model"]
    kind = model["kind"]
    pde = kind != "scalar"
    feedback = [_feedback(ch, pde) for ch in cfg.get("channels", [])]
    nl = cfg.get("nonlinearity", {"kind": "zero"})
    f_kind, f_scale = nl["kind"], float(nl.get("scale", 0.0))
    cert = cfg.get("certificate", {})
    user = (cert["M"], cert["omega"]) if "M" in cert else None
    common = dict(horizon=float(cert.get("horizon", 20.0)), eps_tail=float(cert.get("eps_tail", 0.0)),
                  tail_supremum=cert.get("tail_supremum"))
    if "n_samples" in cert:
        common["n_samples"] = int(cert["n_samples"])

    if kind == "scalar":
        f = nonlinearity_catalog(f_kind, f_scale)
        return build_scalar(float(model["a"]), feedback, f, float(model.get("u0", 1.0)), certificate=user, **common)

    n = int(model["n_x"])
    u0 = field_profile(model.get("u0"), n)
    u1 = field_profile(model.get("u1"), n)
    hist = field_profile(model["history_field"], n) if "history_field" in model else None
    if kind == "damped_wave":
        return build_damped_wave(n, float(model["a"]), model.get("damping_nodes"), feedback, f_kind, f_scale,
                                 u0, u1, history_field=hist, certificate=user, **common)

    past = model.get("past", {"kind": "static"})
    if past["kind"] == "linear":
        vel = field_profile(past["velocity"], n)
        # u(x, t) = u0(x) + t w(x) for t <= 0
        past_fn = lambda t, vel=vel: u0 + t * vel  # noqa: E731
    else:
        past_fn = None
    params = WaveMemoryParams(
        n_x=n, n_s=int(model["n_s"]), kernel=MemoryKernel(float(model["mu0"]), float(model["delta"])),
        feedback=feedback, s_max=model.get("s_max"), f_kind=f_kind, f_scale=f_scale, u0=u0, u1=u1,
        past=past_fn, history_field=hist, certificate=user, **common)
    return build_wave_memory(params) if kind == "wave_memory" else build_plate(params)
