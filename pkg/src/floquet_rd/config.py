"""TOML run configuration with strict key checking and line-numbered errors."""

from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .errors import ConfigError

_num = (int, float)


def _is_num(x):
    return isinstance(x, _num) and not isinstance(x, bool)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _vec(x):
    return isinstance(x, list) and all(_is_num(v) for v in x)


def _mat(x):
    return (isinstance(x, list) and x and all(_vec(r) for r in x)
            and len({len(r) for r in x}) == 1)


def _str(x):
    return isinstance(x, str)


def _bool(x):
    return isinstance(x, bool)


def _pos(x):
    return _is_num(x) and x > 0


def _pos_int(x):
    return _is_int(x) and x > 0


# key -> (checker, description)
SCHEMA = {
    "model": {
        "type": (_str, "string"),
        "epsilon": (_pos, "positive number"),
        "theta": (_is_num, "number"),
        "D": (_mat, "square matrix"),
    },
    "orbit": {
        "guess_point": (_vec, "vector"),
        "guess_period": (_pos, "positive number"),
        "samples": (_pos_int, "positive integer"),
        "newton_max_iter": (_pos_int, "positive integer"),
        "tol": (_pos, "positive number"),
        "interpolation": (lambda x: x in ("trig", "cubic"), "'trig' or 'cubic'"),
    },
    "floquet": {
        "n_points": (_pos_int, "positive integer"),
        "n_refine": (lambda x: _is_int(x) and x >= 0, "non-negative integer"),
        "k_max": (_pos, "positive number"),
        "k_fit": (_pos, "positive number"),
        "tol_re": (_pos, "positive number"),
        "tol_d0": (_pos, "positive number"),
    },
    "grid": {
        "n": (lambda x: x in (1, 2) and _is_int(x), "1 or 2"),
        "L": (_pos, "positive number"),
        "M": (_pos_int, "positive integer"),
    },
    "sim": {
        "dt": (_pos, "positive number"),
        "t_end": (_pos, "positive number"),
        "t0": (_is_num, "number"),
        "record_every": (_pos, "positive number"),
        "snapshot_times": (_vec, "list of numbers"),
        "scheme": (lambda x: x in ("strang", "lie"), "'strang' or 'lie'"),
        "dealias": (_bool, "boolean"),
        "linear": (_bool, "boolean"),
        "fit_window": (lambda x: _vec(x) and len(x) == 2, "pair of numbers"),
    },
    "perturbation": {
        "shape": (lambda x: x in ("gaussian-bump", "fourier-mode", "file"),
                  "'gaussian-bump', 'fourier-mode' or 'file'"),
        "amplitude": (lambda x: _is_num(x) and x >= 0, "non-negative number"),
        "width": (_pos, "positive number"),
        "direction": (_vec, "vector"),
        "center": (_vec, "vector"),
        "mode": (lambda x: isinstance(x, list) and all(_is_int(v) for v in x), "list of integers"),
        "file": (_str, "path string"),
    },
    "sweep": {
        "axis": (lambda x: isinstance(x, list) and all(isinstance(a, dict) for a in x),
                 "array of tables"),
    },
    "verify": {
        "slow": (_bool, "boolean"),
        "tolerances": (lambda x: isinstance(x, dict) and all(_is_num(v) for v in x.values()),
                       "table of numbers"),
    },
}

AXIS_KEYS = {"param": _str, "start": _is_num, "stop": _is_num, "num": lambda x: _is_int(x) and x >= 0}
SWEEP_PARAMS = ("theta", "epsilon", "D11", "D12", "D21", "D22")

REQUIRED = {
    "analyze": ("model",),
    "sweep": ("model", "sweep"),
    "simulate": ("model", "grid", "sim", "perturbation"),
    "verify": (),
}


def _find_line(text, block, key=None):
    """Best-effort 1-based line of ``[block]`` or of ``key`` inside it."""
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[\[?\s*([A-Za-z0-9_.\-]+)\s*\]\]?", s)
        if m:
            current = m.group(1)
            if key is None and current == block:
                return i
            continue
        if key is not None and current is not None and current.split(".")[0] == block:
            if re.match(rf"^\s*\"?{re.escape(key)}\"?\s*=", line):
                return i
    return None


@dataclass
class RunConfig:
    data: dict
    text: str = field(default="", repr=False, compare=False)

    def block(self, name) -> dict:
        return self.data.get(name, {})

    def require(self, command):
        for b in REQUIRED.get(command, ()):
            if b not in self.data:
                raise ConfigError(f"missing [{b}] block required by '{command}'")

    def to_toml(self) -> str:
        return tomli_w.dumps(self.data)

    def copy(self):
        return RunConfig(copy.deepcopy(self.data), self.text)


def _err(text, msg, block, key=None):
    return ConfigError(msg, _find_line(text, block, key) or _find_line(text, block))


def _validate(data, text):
    for block, body in data.items():
        if block not in SCHEMA:
            raise _err(text, f"unknown block [{block}]", block)
        if not isinstance(body, dict):
            raise ConfigError(f"[{block}] must be a table")
        for key, val in body.items():
            if key not in SCHEMA[block]:
                raise _err(text, f"unknown key '{key}' in [{block}]", block, key)
            check, desc = SCHEMA[block][key]
            if not check(val):
                raise _err(text, f"[{block}] {key} must be a {desc}", block, key)
    model = data.get("model")
    if model is not None:
        if "type" not in model:
            raise _err(text, "[model] needs a 'type'", "model")
        D = model.get("D")
        if D is not None and len(D) != len(D[0]):
            raise _err(text, "[model] D must be square", "model", "D")
    grid = data.get("grid")
    if grid is not None and "M" in grid:
        M = grid["M"]
        if M < 16 or M & (M - 1):
            raise _err(text, "[grid] M must be a power of two and at least 16", "grid", "M")
    for ax in data.get("sweep", {}).get("axis", []):
        for key, val in ax.items():
            if key not in AXIS_KEYS:
                raise _err(text, f"unknown key '{key}' in [[sweep.axis]]", "sweep", key)
            if not AXIS_KEYS[key](val):
                raise _err(text, f"[[sweep.axis]] bad value for '{key}'", "sweep", key)
        for key in ("param", "start", "stop", "num"):
            if key not in ax:
                raise _err(text, f"[[sweep.axis]] needs '{key}'", "sweep")
        if ax["param"] not in SWEEP_PARAMS:
            raise _err(text, f"cannot sweep over '{ax['param']}'; choose from {SWEEP_PARAMS}",
                       "sweep", "param")
    if len(data.get("sweep", {}).get("axis", [])) > 2:
        raise _err(text, "at most two sweep axes", "sweep")


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", msg)
            line = int(m.group(1)) if m else None
        raise ConfigError(f"syntax error: {msg}", line) from None
    _validate(data, text)
    return RunConfig(data, text)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# typed views -------------------------------------------------------------


def model_from_config(cfg: RunConfig, overrides=None):
    from .kinetics import build_model

    params = dict(cfg.block("model"))
    params.update(overrides or {})
    type_ = params.pop("type")
    if type_ == "example":
        params.setdefault("epsilon", 0.5)
        params.setdefault("theta", 0.0)
        params.setdefault("D", [[1.0, 0.0], [0.0, 1.0]])
    try:
        return build_model(type_, **params)
    except (TypeError, ValueError) as exc:
        raise _err(cfg.text, f"[model] {exc}", "model") from None


def orbit_kwargs(cfg: RunConfig, model):
    b = cfg.block("orbit")
    if "guess_point" in b:
        g = np.array(b["guess_point"], dtype=float)
    elif model.oracles is not None:
        g = 0.9 * model.oracles.orbit(0.0)
    else:
        raise ConfigError("[orbit] guess_point is required for this model type")
    return dict(guess_point=g, guess_period=b.get("guess_period", 2 * math.pi),
                samples=b.get("samples", 256), newton_max_iter=b.get("newton_max_iter", 25),
                tol=b.get("tol", 1e-10), interpolation=b.get("interpolation", "trig"))


def floquet_kwargs(cfg: RunConfig):
    b = cfg.block("floquet")
    return dict(n_points=b.get("n_points", 200), n_refine=b.get("n_refine", 20),
                k_max=b.get("k_max"), k_fit=b.get("k_fit"),
                tol_re=b.get("tol_re", 1e-6), tol_d0=b.get("tol_d0", 1e-8))


def grid_from_config(cfg: RunConfig):
    from .simulate import Grid

    b = cfg.block("grid")
    try:
        return Grid(b.get("n", 1), float(b.get("L", 200.0)), b.get("M", 2048))
    except ValueError as exc:
        raise _err(cfg.text, f"[grid] {exc}", "grid") from None


def sim_from_config(cfg: RunConfig):
    from .simulate import SimConfig

    b = cfg.block("sim")
    kw = {k: b[k] for k in ("dt", "t_end", "record_every", "scheme", "dealias") if k in b}
    if "snapshot_times" in b:
        kw["snapshot_times"] = tuple(float(x) for x in b["snapshot_times"])
    return SimConfig(**kw)


def perturbation_from_config(cfg: RunConfig, grid, N):
    from .simulate import PerturbationSpec

    b = dict(cfg.block("perturbation"))
    for key in ("direction", "center", "mode"):
        if key in b:
            b[key] = tuple(b[key])
    b.setdefault("direction", tuple([0.0] * (N - 1) + [1.0]))
    b.setdefault("center", tuple([0.0] * grid.n))
    try:
        return PerturbationSpec(**b)
    except ValueError as exc:
        raise _err(cfg.text, f"[perturbation] {exc}", "perturbation") from None
