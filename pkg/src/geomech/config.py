"""Line-oriented experiment configuration files.

A configuration is plain text, one ``key = value`` pair per line.  Blank
lines and lines starting with ``#`` are ignored.  Values are scalars,
integers, choices from a fixed list, or three space-separated floats for
vectors.  Keys that the selected experiment does not understand are
rejected rather than ignored, so a typo cannot silently fall back to a
default.

Every experiment requires ``h`` plus its horizon key (``t_final`` in
seconds for ``simulate``, ``n_steps`` for the rest); all physical
parameters carry documented defaults that reproduce the flagship runs in
``configs/``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import BadValue, MissingKey, ParseError

__all__ = ["ExperimentConfig", "parse_config"]

_REQUIRED = object()

EXPERIMENTS = ("simulate", "dmoc", "shoot", "clag")
MODELS = ("mass_spring", "planar", "spherical", "rigid_body")
INTEGRATORS = ("vi", "rk45", "rk45-quat")

# Tolerance for accepting a hand-written unit vector before renormalizing.
UNIT_SLACK = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated description of one run.

    ``horizon`` is a duration in seconds for ``simulate`` and a step count
    for the other experiments.  ``params`` holds the remaining typed values
    keyed exactly as they appear in the file.
    """

    experiment: str
    model: str
    integrator: str
    h: float
    horizon: float
    seed: int
    out_dir: str
    params: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def __getitem__(self, key: str):
        return self.params[key]


# ---------------------------------------------------------------------------
# Scalar parsers.  Each returns the typed value or raises ValueError with a
# reason; the caller attaches the key name and line number.


def _float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got '{text}'")
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _positive(text: str) -> float:
    value = _float(text)
    if value <= 0.0:
        raise ValueError("must be positive")
    return value


def _nonnegative(text: str) -> float:
    value = _float(text)
    if value < 0.0:
        raise ValueError("must be nonnegative")
    return value


def _int(text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ValueError(f"expected an integer, got '{text}'")


def _positive_int(text: str) -> int:
    value = _int(text)
    if value <= 0:
        raise ValueError("must be a positive integer")
    return value


def _nonnegative_int(text: str) -> int:
    value = _int(text)
    if value < 0:
        raise ValueError("must be a nonnegative integer")
    return value


def _vec3(text: str) -> np.ndarray:
    parts = text.split()
    if len(parts) != 3:
        raise ValueError(f"expected three numbers, got {len(parts)}")
    vec = np.array([_float(p) for p in parts])
    return vec


def _string(text: str) -> str:
    if not text:
        raise ValueError("must be nonempty")
    return text


def _choice(options: tuple) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got '{text}'")
        return text

    return parse


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], object]
    default: object = _REQUIRED


# ---------------------------------------------------------------------------
# Per-experiment schemas


def _common_keys() -> dict:
    return {
        "experiment": _Key(_choice(EXPERIMENTS)),
        "seed": _Key(_nonnegative_int, 0),
        "out_dir": _Key(_string, "."),
    }


_MODEL_KEYS = {
    "mass_spring": {
        "mass": _Key(_positive, 1.0),
        "stiffness": _Key(_positive, 1.0),
        "q0": _Key(_float, math.sqrt(2.0)),
        "qdot0": _Key(_float, 0.0),
    },
    "planar": {
        "mass": _Key(_positive, 1.0),
        "length": _Key(_positive, 9.81),
        "gravity": _Key(_positive, 9.81),
        "theta0": _Key(_float, 0.5 * math.pi),
        "omega0": _Key(_float, 0.0),
    },
    "spherical": {
        "mass": _Key(_positive, 1.0),
        "length": _Key(_positive, 9.81),
        "gravity": _Key(_positive, 9.81),
        "q0": _Key(_vec3, np.array([0.5 * math.sqrt(3.0), 0.0, 0.5])),
        "omega0": _Key(_vec3, np.array([-0.05 * math.sqrt(3.0), 0.0, 0.15])),
    },
    "rigid_body": {
        "mu": _Key(_nonnegative, 1.0),
        "m1": _Key(_positive, 0.5),
        "m2": _Key(_positive, 0.5),
        "rho1": _Key(_vec3, np.array([0.5, 0.0, 0.0])),
        "rho2": _Key(_vec3, np.array([-0.5, 0.0, 0.0])),
        "sphere_radius": _Key(_positive, 0.3),
        "x0": _Key(_vec3, np.array([4.0, 0.0, 0.0])),
        "v0": _Key(_vec3, np.array([0.0, 0.5, 0.0])),
        "Omega0": _Key(_vec3, np.array([0.1, 0.45, 0.2])),
    },
}

_RK_KEYS = {
    "rtol": _Key(_positive, 1e-5),
    "atol": _Key(_positive, 1e-8),
}

_DMOC_KEYS = {
    "h": _Key(_positive),
    "n_steps": _Key(_positive_int),
    "mass": _Key(_positive, 1.0),
    "length": _Key(_positive, 9.81),
    "gravity": _Key(_positive, 9.81),
    "q0": _Key(_vec3, np.array([0.0, 0.0, 1.0])),
    "omega0": _Key(_vec3, np.zeros(3)),
    "q_des": _Key(_vec3, np.array([0.0, 0.0, -1.0])),
    "omega_des": _Key(_vec3, np.zeros(3)),
    "tol_constraint": _Key(_positive, 1e-6),
    "tol_grad": _Key(_positive, 1e-5),
    "max_outer": _Key(_positive_int, 15),
    "max_inner": _Key(_positive_int, 600),
    "rho0": _Key(_positive, 10.0),
}

_SHOOT_KEYS = {
    "h": _Key(_positive),
    "n_steps": _Key(_positive_int),
    "mu": _Key(_nonnegative, 1.0),
    "m1": _Key(_positive, 0.5),
    "m2": _Key(_positive, 0.5),
    "rho1": _Key(_vec3, np.array([0.5, 0.0, 0.0])),
    "rho2": _Key(_vec3, np.array([-0.5, 0.0, 0.0])),
    "sphere_radius": _Key(_positive, 0.3),
    "x0": _Key(_vec3, np.array([4.0, 0.0, 0.0])),
    "v0": _Key(_vec3, np.array([0.0, 0.5, 0.0])),
    "Omega0": _Key(_vec3, np.zeros(3)),
    "target_rotvec": _Key(_vec3, np.array([0.02, 0.01, 0.12929997])),
    "target_x": _Key(_vec3, np.array([3.32860514, 2.37710614, 0.02])),
    "target_v": _Key(_vec3, np.array([-0.28294034, 0.40611882, 0.005])),
    "target_Omega": _Key(_vec3, np.array([0.01, 0.005, 0.07634413])),
    "w_force": _Key(_positive, 1.0),
    "w_moment": _Key(_positive, 1.0),
    "tol": _Key(_positive, 1e-12),
    "max_iter": _Key(_positive_int, 40),
    "fd_step": _Key(_positive, 1e-6),
}

_CLAG_KEYS = {
    "h": _Key(_positive),
    "n_steps": _Key(_positive_int),
    "pend_mass": _Key(_positive, 0.14),
    "cart_mass": _Key(_nonnegative, 0.44),
    "length": _Key(_positive, 0.215),
    "gravity": _Key(_positive, 9.81),
    "kappa_factor": _Key(_positive, 2.0),
    "kappa": _Key(_positive, None),
    "theta0": _Key(_float, 0.15),
    "thetadot0": _Key(_float, 0.0),
    "s0": _Key(_float, 0.0),
    "sdot0": _Key(_float, 0.05),
}


def _schema_for(experiment: str, raw: dict) -> dict:
    """Assemble the full key set once the experiment (and model) are known."""
    schema = _common_keys()
    if experiment == "simulate":
        schema["model"] = _Key(_choice(MODELS))
        schema["integrator"] = _Key(_choice(INTEGRATORS), "vi")
        schema["h"] = _Key(_positive)
        schema["t_final"] = _Key(_positive)
        model = raw.get("model", (None, 0))[0]
        if model in _MODEL_KEYS:
            schema.update(_MODEL_KEYS[model])
        integrator = raw.get("integrator", ("vi", 0))[0]
        if integrator in ("rk45", "rk45-quat"):
            schema.update(_RK_KEYS)
    elif experiment == "dmoc":
        schema.update(_DMOC_KEYS)
    elif experiment == "shoot":
        schema.update(_SHOOT_KEYS)
    elif experiment == "clag":
        schema.update(_CLAG_KEYS)
    return schema


# ---------------------------------------------------------------------------
# Cross-key validation


def _unitize(key: str, vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > UNIT_SLACK:
        raise BadValue(f"{key}: must be unit length (|v| = {norm:.6g})")
    return vec / norm


def _tangentize(key: str, omega: np.ndarray, q: np.ndarray) -> np.ndarray:
    radial = float(omega @ q)
    if abs(radial) > UNIT_SLACK * (1.0 + float(np.linalg.norm(omega))):
        raise BadValue(f"{key}: must be orthogonal to the direction vector")
    return omega - radial * q


def _post_validate(experiment: str, values: dict) -> None:
    if experiment == "simulate":
        if values["integrator"] == "rk45-quat" and values["model"] != "rigid_body":
            raise BadValue("integrator: rk45-quat applies only to model rigid_body")
        if values["model"] == "spherical":
            values["q0"] = _unitize("q0", values["q0"])
            values["omega0"] = _tangentize("omega0", values["omega0"], values["q0"])
    elif experiment == "dmoc":
        values["q0"] = _unitize("q0", values["q0"])
        values["q_des"] = _unitize("q_des", values["q_des"])
        values["omega0"] = _tangentize("omega0", values["omega0"], values["q0"])
        values["omega_des"] = _tangentize("omega_des", values["omega_des"], values["q_des"])


# ---------------------------------------------------------------------------
# Parser


def _split_lines(text: str) -> dict:
    """Map key -> (raw value, line number), rejecting malformed lines."""
    raw: dict = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"line {number}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ParseError(f"line {number}: empty key")
        if key in raw:
            raise ParseError(f"line {number}: duplicate key '{key}'")
        raw[key] = (value, number)
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate one configuration file.

    Raises
    ------
    ParseError
        Malformed line, duplicate key, or a key the experiment does not
        accept (with the offending line number).
    MissingKey
        A required key is absent.
    BadValue
        A value fails type or range validation.
    """
    raw = _split_lines(text)
    if "experiment" not in raw:
        raise MissingKey("missing key 'experiment'")
    experiment_text, experiment_line = raw["experiment"]
    try:
        experiment = _choice(EXPERIMENTS)(experiment_text)
    except ValueError as exc:
        raise BadValue(f"line {experiment_line}: experiment: {exc}")

    schema = _schema_for(experiment, raw)
    for key, (_, number) in raw.items():
        if key not in schema:
            raise ParseError(
                f"line {number}: unknown key '{key}' for experiment '{experiment}'"
            )

    values: dict = {}
    for key, spec in schema.items():
        if key in raw:
            value_text, number = raw[key]
            try:
                values[key] = spec.parse(value_text)
            except ValueError as exc:
                raise BadValue(f"line {number}: {key}: {exc}")
        elif spec.default is _REQUIRED:
            raise MissingKey(f"missing key '{key}' for experiment '{experiment}'")
        else:
            values[key] = spec.default
    _post_validate(experiment, values)

    if experiment == "simulate":
        model = values.pop("model")
        integrator = values.pop("integrator")
        horizon = values.pop("t_final")
    else:
        model = {"dmoc": "spherical", "shoot": "rigid_body", "clag": "cart_pendulum"}[
            experiment
        ]
        integrator = "vi"
        horizon = values.pop("n_steps")
    values.pop("experiment")
    return ExperimentConfig(
        experiment=experiment,
        model=model,
        integrator=integrator,
        h=values.pop("h"),
        horizon=horizon,
        seed=values.pop("seed"),
        out_dir=values.pop("out_dir"),
        params=values,
    )


def config_defaults(experiment: str, model: Optional[str] = None) -> dict:
    """Documented defaults for an experiment (and model, for ``simulate``).

    Returns a mapping key -> default; required keys map to the string
    ``'required'``.  Exposed for the README tables and tests.
    """
    if experiment not in EXPERIMENTS:
        raise BadValue(f"experiment: expected one of {', '.join(EXPERIMENTS)}")
    raw = {}
    if model is not None:
        raw["model"] = (model, 0)
    schema = _schema_for(experiment, raw)
    out = {}
    for key, spec in schema.items():
        out[key] = "required" if spec.default is _REQUIRED else spec.default
    return out
