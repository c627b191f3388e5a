"""JSON scenario files: schema, keyed validation, and built-in presets.

Rates and detunings are in GHz, times in ns. A scenario either spells out
both arms or gives a ``biexciton`` section from which the arms are derived.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, replace

import jsonschema

from .limits import BiexcitonScenario
from .model import ArmConfig, CavityPort, DipoleTransition, ParameterError
from .optimize import DEFAULT_GRID, DEFAULT_PHOTONS


class ConfigError(ValueError):
    """Invalid scenario; the message starts with the offending key path."""


SWEEP_VARIABLES = (
    "reflected_photons", "omega", "arm1.delta", "arm2.delta",
    "cavity_separation", "offset1", "offset2", "dot_shift1", "dot_shift2",
)
SWEEP_MODES = ("evaluate", "optimize_ratio", "optimize", "constant_fidelity")

_number = {"type": "number"}
_complex = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_interval = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_transition = _obj({"g": _number, "delta": _number, "gamma": _number}, ["g"])
_arm = _obj(
    {
        "cavity": _obj({"kappa_r": _number, "kappa_t": _number, "kappa_l": _number, "omega_c": _number},
                       ["kappa_r", "kappa_t"]),
        "g_transition": _transition,
        "m_transition": _transition,
    },
    ["cavity", "g_transition"],
)
_axis = _obj(
    {
        "variable": {"enum": list(SWEEP_VARIABLES)},
        "start": _number, "stop": _number,
        "steps": {"type": "integer", "minimum": 1},
        "scale": {"enum": ["linear", "log"]},
        "values": {"type": "array", "items": _number, "minItems": 1},
    },
    ["variable"],
)

SCHEMA = _obj(
    {
        "preset": {"type": "string"},
        "arm1": _arm,
        "arm2": _arm,
        "biexciton": _obj({k: _number for k in (
            "g_X", "g_XX", "gamma_X", "gamma_XX", "delta_X", "T2", "kappa", "delta_XX1", "delta_XX2")}),
        "laser": _obj(
            {
                "omega": _number,
                "alpha": _complex,
                "beta": {"oneOf": [_complex, {"enum": ["auto-match", "auto-match-second"]}]},
                "reflected_photons": _number,
            }
        ),
        "sweep": _obj(
            {
                "mode": {"enum": list(SWEEP_MODES)},
                "axes": {"type": "array", "items": _axis, "minItems": 1},
                "target_fidelity": _number,
            },
            ["axes"],
        ),
        "limits": _obj({"tau_p": _number, "margin": _number}, ["tau_p"]),
        "optimizer": _obj(
            {
                "grid": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3},
                "reflected_photons": _number,
                "omega_range": _interval,
                "ratio_re": _interval,
                "ratio_im": _interval,
                "starts": {"type": "integer", "minimum": 1},
            }
        ),
    },
)


@dataclass(frozen=True)
class Laser:
    omega: float = 0.0
    alpha: complex | None = None
    beta: complex | str = "auto-match"
    reflected_photons: float | None = None


@dataclass(frozen=True)
class Axis:
    variable: str
    values: tuple


@dataclass(frozen=True)
class Sweep:
    mode: str
    axes: tuple
    target_fidelity: float | None = None

    @property
    def shape(self) -> tuple:
        return tuple(len(a.values) for a in self.axes)


@dataclass(frozen=True)
class LimitsConfig:
    tau_p: float
    margin: float = 10.0


@dataclass(frozen=True)
class OptimizerConfig:
    grid: tuple = DEFAULT_GRID
    reflected_photons: float = DEFAULT_PHOTONS
    omega_range: tuple | None = None
    ratio_re: tuple | None = None
    ratio_im: tuple | None = None
    starts: int = 8

    def problem_kw(self) -> dict:
        return {
            "grid": self.grid, "reflected_photons": self.reflected_photons, "omega_range": self.omega_range,
            "ratio_re": self.ratio_re, "ratio_im": self.ratio_im, "starts": self.starts,
        }


@dataclass(frozen=True)
class Scenario:
    arm1: ArmConfig
    arm2: ArmConfig
    laser: Laser = Laser()
    sweep: Sweep | None = None
    limits: LimitsConfig | None = None
    optimizer: OptimizerConfig = OptimizerConfig()
    biexciton: BiexcitonScenario | None = None
    preset: str | None = None


def _keyed(path: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ParameterError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def _complex_value(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _transition(path, d) -> DipoleTransition:
    return _keyed(path, DipoleTransition, g=d["g"], delta=d.get("delta", 0.0), gamma=d.get("gamma", 0.125))


def _arm(path, d) -> ArmConfig:
    c = d["cavity"]
    cavity = _keyed(f"{path}.cavity", CavityPort, kappa_r=c["kappa_r"], kappa_t=c["kappa_t"],
                    kappa_l=c.get("kappa_l", 0.0), omega_c=c.get("omega_c", 0.0))
    g_tr = _transition(f"{path}.g_transition", d["g_transition"])
    m_tr = _transition(f"{path}.m_transition", d["m_transition"]) if "m_transition" in d else DipoleTransition(g=0.0)
    return ArmConfig(cavity, g_tr, m_tr)


def _axis(path, d) -> Axis:
    var = d["variable"]
    if "values" in d:
        if any(k in d for k in ("start", "stop", "steps", "scale")):
            raise ConfigError(f"{path}.values: give either values or start/stop/steps, not both")
        values = tuple(float(v) for v in d["values"])
    else:
        for k in ("start", "stop", "steps"):
            if k not in d:
                raise ConfigError(f"{path}.{k}: required unless values are listed")
        start, stop, steps = float(d["start"]), float(d["stop"]), int(d["steps"])
        scale = d.get("scale", "linear")
        if scale == "log":
            if not (start > 0 and stop > 0):
                raise ConfigError(f"{path}.start: log axes need positive start and stop")
            values = _logspace(start, stop, steps)
        else:
            values = _linspace(start, stop, steps)
    for v in values:
        if not math.isfinite(v):
            raise ConfigError(f"{path}.values: non-finite entry")
    if var == "reflected_photons" and min(values) <= 0:
        raise ConfigError(f"{path}.values: reflected_photons must be > 0")
    return Axis(var, values)


def _linspace(a, b, n):
    if n == 1:
        return (a,)
    return tuple(a + (b - a) * k / (n - 1) for k in range(n))


def _logspace(a, b, n):
    la, lb = math.log10(a), math.log10(b)
    return tuple(10 ** v for v in _linspace(la, lb, n))


def _positive(path, v):
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"{path}: must be a finite number > 0, got {v}")
    return float(v)


def _interval_value(path, v):
    if v is None:
        return None
    lo, hi = float(v[0]), float(v[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ConfigError(f"{path}: must be a finite ordered interval, got {v}")
    return (lo, hi)


def load_scenario(doc: dict) -> Scenario:
    """Validate a parsed JSON document and build the scenario."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {err.message}")

    bx = None
    if "biexciton" in doc:
        for key in ("arm1", "arm2"):
            if key in doc:
                raise ConfigError(f"{key}: not allowed together with biexciton (arms are derived from it)")
        bx = _keyed("biexciton", BiexcitonScenario, **doc["biexciton"])
        arm1, arm2 = bx.arm(1), bx.arm(2)
    else:
        for key in ("arm1", "arm2"):
            if key not in doc:
                raise ConfigError(f"{key}: required (or give a biexciton section)")
        arm1, arm2 = _arm("arm1", doc["arm1"]), _arm("arm2", doc["arm2"])

    ld = doc.get("laser", {})
    if "alpha" in ld and "reflected_photons" in ld:
        raise ConfigError("laser.reflected_photons: give either alpha or reflected_photons, not both")
    laser = Laser(
        omega=float(ld.get("omega", 0.0)),
        alpha=_complex_value(ld["alpha"]) if "alpha" in ld else None,
        beta=ld.get("beta", "auto-match") if isinstance(ld.get("beta", "auto-match"), str)
        else _complex_value(ld["beta"]),
        reflected_photons=_positive("laser.reflected_photons", ld["reflected_photons"])
        if "reflected_photons" in ld else None,
    )
    if not isinstance(laser.beta, str) and laser.alpha is None:
        raise ConfigError("laser.alpha: required when beta is given as a number")
    for key, v in (("laser.omega", laser.omega), ("laser.alpha", laser.alpha), ("laser.beta", laser.beta)):
        if isinstance(v, (int, float, complex)) and not math.isfinite(abs(v)):
            raise ConfigError(f"{key}: must be finite")

    sweep = None
    if "sweep" in doc:
        sd = doc["sweep"]
        axes = tuple(_axis(f"sweep.axes.{i}", a) for i, a in enumerate(sd["axes"]))
        names = [a.variable for a in axes]
        if len(set(names)) != len(names):
            raise ConfigError("sweep.axes: each variable may appear only once")
        for i, n in enumerate(names):
            if n.startswith("dot_shift") and bx is None:
                raise ConfigError(f"sweep.axes.{i}.variable: {n} needs a biexciton section")
        for k in "12":
            if f"arm{k}.delta" in names and f"offset{k}" in names:
                raise ConfigError(f"sweep.axes: arm{k}.delta and offset{k} both move dipole {k}")
        mode = sd.get("mode", "evaluate")
        target = sd.get("target_fidelity")
        if mode == "constant_fidelity":
            if target is None:
                raise ConfigError("sweep.target_fidelity: required for constant_fidelity mode")
            if not 0 < target <= 1:
                raise ConfigError(f"sweep.target_fidelity: must lie in (0, 1], got {target}")
            if "reflected_photons" in names:
                raise ConfigError("sweep.axes: reflected_photons is solved for in constant_fidelity mode")
        elif target is not None:
            raise ConfigError(f"sweep.target_fidelity: only used by constant_fidelity mode, not {mode}")
        if mode in ("optimize_ratio", "optimize") and "reflected_photons" in names:
            raise ConfigError(f"sweep.axes: reflected_photons is fixed by the optimizer in {mode} mode")
        if mode == "optimize" and "omega" in names:
            raise ConfigError("sweep.axes: omega is optimized in optimize mode")
        sweep = Sweep(mode, axes, None if target is None else float(target))

    limits = None
    if "limits" in doc:
        lim = doc["limits"]
        limits = LimitsConfig(_positive("limits.tau_p", lim["tau_p"]), float(lim.get("margin", 10.0)))
        if not (math.isfinite(limits.margin) and limits.margin > 1):
            raise ConfigError(f"limits.margin: must be > 1, got {limits.margin}")

    od = doc.get("optimizer", {})
    opt = OptimizerConfig(
        grid=tuple(od.get("grid", DEFAULT_GRID)),
        reflected_photons=_positive("optimizer.reflected_photons", od.get("reflected_photons", DEFAULT_PHOTONS)),
        omega_range=_interval_value("optimizer.omega_range", od.get("omega_range")),
        ratio_re=_interval_value("optimizer.ratio_re", od.get("ratio_re")),
        ratio_im=_interval_value("optimizer.ratio_im", od.get("ratio_im")),
        starts=int(od.get("starts", 8)),
    )
    return Scenario(arm1, arm2, laser, sweep, limits, opt, bx, doc.get("preset"))


def with_values(sc: Scenario, values: dict) -> Scenario:
    """Scenario with sweep variables substituted.

    Order: dot shifts rebuild the biexciton arms, then the reference frame
    (cavity separation and absolute dipole offsets), then per-arm detunings,
    then laser settings.
    """
    arm1, arm2, bx = sc.arm1, sc.arm2, sc.biexciton
    if "dot_shift1" in values or "dot_shift2" in values:
        bx = replace(bx, delta_XX1=values.get("dot_shift1", bx.delta_XX1),
                     delta_XX2=values.get("dot_shift2", bx.delta_XX2))
        arm1 = bx.arm(1, arm1.cavity.omega_c)
        arm2 = bx.arm(2, arm2.cavity.omega_c)
    if {"cavity_separation", "offset1", "offset2"} & values.keys():
        from .optimize import detuned_arms

        c1, c2 = arm1.cavity.omega_c, arm2.cavity.omega_c
        sep = values.get("cavity_separation", c2 - c1)
        off1 = values.get("offset1", c1 + arm1.g_transition.delta)
        off2 = values.get("offset2", c2 + arm2.g_transition.delta)
        arm1, arm2 = detuned_arms(arm1, sep, off1, off2, base2=arm2)
    if "arm1.delta" in values:
        arm1 = replace(arm1, g_transition=replace(arm1.g_transition, delta=values["arm1.delta"]))
    if "arm2.delta" in values:
        arm2 = replace(arm2, g_transition=replace(arm2.g_transition, delta=values["arm2.delta"]))
    laser = sc.laser
    if "omega" in values:
        laser = replace(laser, omega=values["omega"])
    if "reflected_photons" in values:
        laser = replace(laser, reflected_photons=values["reflected_photons"])
    return replace(sc, arm1=arm1, arm2=arm2, laser=laser, biexciton=bx)


# built-in presets, stored as the JSON they serialize to
_DIT_ARM = {
    "cavity": {"kappa_r": 50.0, "kappa_t": 50.0, "kappa_l": 0.0, "omega_c": 0.0},
    "g_transition": {"g": 20.0, "delta": 0.0, "gamma": 0.125},
    "m_transition": {"g": 0.0, "delta": 0.0, "gamma": 0.125},
}


def _arm_at(omega_c, delta):
    arm = copy.deepcopy(_DIT_ARM)
    arm["cavity"]["omega_c"] = omega_c
    arm["g_transition"]["delta"] = delta
    return arm


PRESETS = {
    "dit-resonant": {
        "preset": "dit-resonant",
        "arm1": _arm_at(0.0, 0.0),
        "arm2": _arm_at(0.0, 0.0),
        "laser": {"omega": 0.0, "reflected_photons": 1e-4, "beta": "auto-match"},
        "sweep": {"mode": "evaluate", "axes": [
            {"variable": "reflected_photons", "start": 1e-3, "stop": 100.0, "steps": 51, "scale": "log"}]},
        "limits": {"tau_p": 1.0, "margin": 10.0},
    },
    "constant-fidelity": {
        "preset": "constant-fidelity",
        "arm1": _arm_at(0.0, 0.0),
        "arm2": _arm_at(0.0, 0.0),
        "laser": {"omega": 0.0, "beta": "auto-match"},
        "sweep": {"mode": "constant_fidelity", "target_fidelity": 0.85, "axes": [
            {"variable": "arm2.delta", "values": [0.0, 25.0, 50.0]},
            {"variable": "arm1.delta", "start": 0.0, "stop": 150.0, "steps": 31}]},
    },
    "frequency-scan": {
        "preset": "frequency-scan",
        "arm1": _arm_at(-25.0, 25.0),
        "arm2": _arm_at(25.0, 0.0),
        "laser": {"omega": 0.0},
        "sweep": {"mode": "optimize_ratio", "axes": [
            {"variable": "offset1", "values": [-50.0, 0.0, 50.0]},
            {"variable": "omega", "start": -150.0, "stop": 150.0, "steps": 301}]},
    },
    "cavity-detuning": {
        "preset": "cavity-detuning",
        "arm1": _arm_at(0.0, 0.0),
        "arm2": _arm_at(0.0, 0.0),
        "sweep": {"mode": "optimize", "axes": [
            {"variable": "offset1", "values": [-100.0, -50.0, 0.0, 50.0, 100.0]},
            {"variable": "cavity_separation", "start": 0.0, "stop": 100.0, "steps": 21}]},
    },
    "separation-surface": {
        "preset": "separation-surface",
        "arm1": _arm_at(0.0, 0.0),
        "arm2": _arm_at(0.0, 0.0),
        "sweep": {"mode": "optimize", "axes": [
            {"variable": "offset1", "start": -100.0, "stop": 150.0, "steps": 11},
            {"variable": "cavity_separation", "start": 0.0, "stop": 100.0, "steps": 11}]},
    },
    "biexciton": {
        "preset": "biexciton",
        "biexciton": {"g_X": 20.0, "g_XX": 20.0, "gamma_X": 0.125, "delta_X": 250.0, "T2": 2.0,
                      "kappa": 50.0, "delta_XX1": 0.0, "delta_XX2": 0.0},
        "laser": {"omega": 0.0, "reflected_photons": 0.01, "beta": "auto-match"},
        "sweep": {"mode": "optimize_ratio", "axes": [
            {"variable": "dot_shift1", "start": -100.0, "stop": 100.0, "steps": 9},
            {"variable": "dot_shift2", "start": -100.0, "stop": 100.0, "steps": 9}]},
        "limits": {"tau_p": 1.0, "margin": 10.0},
    },
}


def preset_document(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown name {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])


def preset_scenario(name: str) -> Scenario:
    return load_scenario(preset_document(name))
