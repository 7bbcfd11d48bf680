"""Strict TOML run configuration.

Every key has a documented default; unknown keys are rejected, and
validation errors name the offending key as ``section.key``::

    seed = 42
    paths = 20000
    kernel = { type = "fractional", alpha = 0.5 }

    [space]
    modes = 64
    spectrum = "dirichlet-laplacian"   # or an explicit list of mu_k
    q_eigenvalues = "cylindrical"      # or an explicit list of lambda_k

    [grid]
    dt = 0.001953125
    T = 1.0
"""

from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import dataclass
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .convolution import AdaptedModulated, ConstantB, DeterministicModulated, PsiProcess
from .grid import TimeGrid
from .kernels import Kernel, KernelError, kernel_from_spec
from .spectral import HilbertSchmidtOperator, SpectralSpace


class ConfigError(ValueError):
    """Parse or validation failure; ``key`` names the offending entry when known."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "paths": 20000,
    "output_dir": "svolterra-out",
    "kernel": {"type": "constant"},
    "x0": "zero",
    "space": {"modes": 64, "spectrum": "dirichlet-laplacian", "q_eigenvalues": "cylindrical"},
    "grid": {"dt": 2.0**-9, "T": 1.0},
    "psi": {"type": "constant", "operator": "identity", "phi": "one", "functional": "saturating", "bound": 1.0},
    "run": {"workers": 1, "batch_size": 500, "method": "auto"},
    "resolvent_convergence": {"dts": []},
    "simulate": {"write_paths": 4, "pairs": []},
    "noise_dump": {"paths": 1},
    "verify": {"check": "chain", "paths": 100, "tolerance": 5e-2, "dt_sweep": [], "min_factor": 1.4},
    "estimate": {"C": 1.0, "ratio_cap": 3.0, "config_matrix": False, "tail_t": 0.0, "slack": 0.0,
                 "matrix_modes": [1, 8, 64], "matrix_kernels": ["constant", "linear", "fractional"]},
}

# free-form tables validated elsewhere
_OPAQUE = {"kernel"}

PHI = {
    "one": (lambda t: 1.0),
    "sqrt": (lambda t: math.sqrt(t)),
    "exp": (lambda t: math.exp(t)),
    "cos": (lambda t: math.cos(2 * math.pi * t)),
}


def _saturating(t, hist):
    # 1 / (1 + |W^Psi(t_j)|^2): bounded by 1, uses only the current history value
    return 1.0 / (1.0 + np.sum(hist[..., -1] ** 2, axis=-1))


def _cosine(t, hist):
    return np.cos(hist[:, 0, -1])


FUNCTIONALS = {"saturating": _saturating, "cosine": _cosine}


def _merge(defaults: dict, given: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        name = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError("unknown key", name)
        if isinstance(defaults[key], dict) and key not in _OPAQUE:
            if not isinstance(value, dict):
                raise ConfigError("expected a table", name)
            out[key] = _merge(defaults[key], value, name + ".")
        else:
            out[key] = value
    return out


def _positive(d, key, name, kind=float, allow_zero=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", name)
    if kind is int and int(v) != v:
        raise ConfigError(f"expected an integer, got {v!r}", name)
    v = kind(v)
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise ConfigError(f"must be {'nonnegative' if allow_zero else 'positive'}, got {v!r}", name)
    d[key] = v


def _validate(c: dict) -> None:
    _positive(c, "seed", "seed", int, allow_zero=True)
    _positive(c, "paths", "paths", int)
    _positive(c["space"], "modes", "space.modes", int)
    _positive(c["grid"], "dt", "grid.dt")
    _positive(c["grid"], "T", "grid.T")
    _positive(c["run"], "workers", "run.workers", int)
    _positive(c["run"], "batch_size", "run.batch_size", int)
    _positive(c["verify"], "paths", "verify.paths", int)
    _positive(c["verify"], "tolerance", "verify.tolerance")
    _positive(c["estimate"], "C", "estimate.C")
    _positive(c["estimate"], "ratio_cap", "estimate.ratio_cap")
    _positive(c["estimate"], "tail_t", "estimate.tail_t", allow_zero=True)
    _positive(c["simulate"], "write_paths", "simulate.write_paths", int, allow_zero=True)
    _positive(c["noise_dump"], "paths", "noise_dump.paths", int)
    if c["run"]["method"] not in ("auto", "direct", "fft"):
        raise ConfigError("must be auto, direct or fft", "run.method")
    if c["verify"]["check"] not in ("weak", "strong", "ito", "chain"):
        raise ConfigError("must be weak, strong, ito or chain", "verify.check")
    for key in ("dt_sweep",):
        if any(not (isinstance(v, (int, float)) and v > 0) for v in c["verify"][key]):
            raise ConfigError("entries must be positive", f"verify.{key}")
    if any(not (isinstance(v, (int, float)) and v > 0) for v in c["resolvent_convergence"]["dts"]):
        raise ConfigError("entries must be positive", "resolvent_convergence.dts")
    n = c["space"]["modes"]
    for key, flag in (("spectrum", "dirichlet-laplacian"), ("q_eigenvalues", "cylindrical")):
        v = c["space"][key]
        if isinstance(v, list):
            if len(v) != n:
                raise ConfigError(f"needs {n} entries (space.modes)", f"space.{key}")
        elif v != flag:
            raise ConfigError(f"must be {flag!r} or a list", f"space.{key}")
    if isinstance(c["space"]["q_eigenvalues"], list) and min(c["space"]["q_eigenvalues"]) < 0:
        raise ConfigError("entries must be nonnegative", "space.q_eigenvalues")
    try:
        TimeGrid.from_horizon(c["grid"]["T"], c["grid"]["dt"])
    except ValueError as exc:
        raise ConfigError(str(exc), "grid.T") from None
    if not isinstance(c["kernel"], dict):
        raise ConfigError("expected a tagged table such as { type = \"constant\" }", "kernel")
    try:
        kernel_from_spec(c["kernel"])
    except KernelError as exc:
        raise ConfigError(str(exc), "kernel") from None
    p = c["psi"]
    if p["type"] not in ("constant", "modulated", "adapted"):
        raise ConfigError("must be constant, modulated or adapted", "psi.type")
    if p["phi"] not in PHI:
        raise ConfigError(f"must be one of {sorted(PHI)}", "psi.phi")
    if p["functional"] not in FUNCTIONALS:
        raise ConfigError(f"must be one of {sorted(FUNCTIONALS)}", "psi.functional")
    _positive(p, "bound", "psi.bound")
    op = p["operator"]
    if not (op in ("identity", "zero") or isinstance(op, list)):
        raise ConfigError("must be identity, zero, a diagonal list or a matrix", "psi.operator")
    x0 = c["x0"]
    if not (x0 in ("zero", "e1") or (isinstance(x0, list) and len(x0) == n)):
        raise ConfigError(f"must be 'zero', 'e1' or a list of {n} numbers", "x0")


@dataclass(frozen=True)
class RunConfig:
    data: dict

    def __getattr__(self, name):
        try:
            return self.__dict__["data"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def paths_verify(self) -> int:
        return self.data["verify"]["paths"]

    def effective(self) -> dict:
        """Config as echoed into outputs; worker count and output location do not affect results and are left out."""
        data = copy.deepcopy(self.data)
        del data["run"]["workers"]
        del data["output_dir"]
        return data

    def to_json(self) -> str:
        return json.dumps(self.effective(), sort_keys=True, separators=(",", ":"))

    def with_overrides(self, **sections) -> RunConfig:
        """New validated config with ``section={key: value}`` or top-level overrides applied."""
        merged = copy.deepcopy(self.data)
        for key, value in sections.items():
            if isinstance(value, dict):
                merged[key].update(value)
            else:
                merged[key] = value
        return from_dict(merged)


def from_dict(given: dict) -> RunConfig:
    data = _merge(DEFAULTS, given)
    _validate(data)
    return RunConfig(data)


def parse_config(text: str) -> RunConfig:
    """Parse TOML text into a validated :class:`RunConfig` with all defaults filled."""
    try:
        given = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    return from_dict(given)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass(frozen=True, eq=False)
class RunObjects:
    kernel: Kernel
    space: SpectralSpace
    grid: TimeGrid
    psi: PsiProcess
    x0: np.ndarray


def build_space(modes: int, spectrum="dirichlet-laplacian", q="cylindrical", T: float = 1.0) -> SpectralSpace:
    k = np.arange(1, modes + 1, dtype=float)
    mu = -k * k if spectrum == "dirichlet-laplacian" else np.asarray(spectrum, dtype=float)
    lam = np.ones(modes) if q == "cylindrical" else np.asarray(q, dtype=float)
    return SpectralSpace(mu, lam, T)


def build_operator(spec, n: int) -> HilbertSchmidtOperator:
    if spec == "identity":
        return HilbertSchmidtOperator.identity(n)
    if spec == "zero":
        return HilbertSchmidtOperator.zero(n)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1 and arr.size == n:
        return HilbertSchmidtOperator.diagonal(arr)
    if arr.shape == (n, n):
        return HilbertSchmidtOperator(arr)
    raise ConfigError(f"operator must have {n} diagonal entries or be {n}x{n}", "psi.operator")


def build_psi(spec: dict, n: int) -> PsiProcess:
    B = build_operator(spec["operator"], n)
    if spec["type"] == "constant":
        return ConstantB(B)
    if spec["type"] == "modulated":
        return DeterministicModulated(PHI[spec["phi"]], B)
    return AdaptedModulated(FUNCTIONALS[spec["functional"]], B, spec["bound"])


def build_objects(config: RunConfig) -> RunObjects:
    d = config.data
    sp = d["space"]
    space = build_space(sp["modes"], sp["spectrum"], sp["q_eigenvalues"], d["grid"]["T"])
    grid = TimeGrid.from_horizon(d["grid"]["T"], d["grid"]["dt"])
    n = space.n_modes
    if d["x0"] == "zero":
        x0 = np.zeros(n)
    elif d["x0"] == "e1":
        x0 = np.eye(n)[0]
    else:
        x0 = np.asarray(d["x0"], dtype=float)
    return RunObjects(kernel_from_spec(d["kernel"]), space, grid, build_psi(d["psi"], n), x0)
