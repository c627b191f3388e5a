"""Steady-state scattering of a weak field off a dipole-coupled double-sided cavity.

All rates and detunings are plain GHz. Frequencies are measured from a common
reference, so a cavity sits at ``omega_c`` and a transition at
``omega_c + delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

Which = Literal["g", "m"]

CRITICAL_COUPLING_RTOL = 1e-9


class ParameterError(ValueError):
    """An invalid physical parameter; the message names the offending field."""


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class DipoleTransition:
    """One optical transition: vacuum Rabi frequency, detuning from its cavity, non-cavity decay."""

    g: float
    delta: float = 0.0
    gamma: float = 0.125

    def __post_init__(self):
        g = _finite("g", self.g)
        _finite("delta", self.delta)
        gamma = _finite("gamma", self.gamma)
        if g < 0:
            raise ParameterError(f"g must be >= 0, got {g}")
        if gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {gamma}")


@dataclass(frozen=True)
class CavityPort:
    """Cavity resonance and its decay into reflected, transmitted and leaky channels."""

    kappa_r: float
    kappa_t: float
    kappa_l: float = 0.0
    omega_c: float = 0.0

    def __post_init__(self):
        for name in ("kappa_r", "kappa_t", "kappa_l", "omega_c"):
            _finite(name, getattr(self, name))
        if self.kappa_r <= 0:
            raise ParameterError(f"kappa_r must be > 0, got {self.kappa_r}")
        if self.kappa_t < 0:
            raise ParameterError(f"kappa_t must be >= 0, got {self.kappa_t}")
        if self.kappa_l < 0:
            raise ParameterError(f"kappa_l must be >= 0, got {self.kappa_l}")

    @property
    def kappa(self) -> float:
        return self.kappa_r + self.kappa_t + self.kappa_l

    @classmethod
    def critical(cls, kappa: float, leaky: float = 0.0, omega_c: float = 0.0) -> "CavityPort":
        """Critically coupled cavity of total decay ``kappa`` with ``leaky`` split off the transmitted side."""
        return cls(kappa_r=kappa / 2, kappa_t=kappa / 2 - leaky, kappa_l=leaky, omega_c=omega_c)


@dataclass(frozen=True)
class ArmConfig:
    """A cavity with its dipole, seen through the two qubit states.

    The ``m`` transition with ``g = 0`` is the ideal, fully decoupled case.
    """

    cavity: CavityPort
    g_transition: DipoleTransition
    m_transition: DipoleTransition = DipoleTransition(g=0.0)

    def transition(self, which: Which) -> DipoleTransition:
        if which == "g":
            return self.g_transition
        if which == "m":
            return self.m_transition
        raise ParameterError(f"dipole state must be 'g' or 'm', got {which!r}")

    def shifted(self, omega_c: float) -> "ArmConfig":
        """Move the cavity to ``omega_c`` keeping both transitions at fixed absolute frequency."""
        shift = omega_c - self.cavity.omega_c
        return ArmConfig(
            cavity=replace(self.cavity, omega_c=omega_c),
            g_transition=replace(self.g_transition, delta=self.g_transition.delta - shift),
            m_transition=replace(self.m_transition, delta=self.m_transition.delta - shift),
        )


@dataclass(frozen=True)
class ScatterSet:
    """Reflection/transmission amplitudes for both arms and both dipole states.

    Fields may be numpy arrays when evaluated on a frequency grid.
    """

    r1g: complex
    t1g: complex
    r1m: complex
    t1m: complex
    r2g: complex
    t2g: complex
    r2m: complex
    t2m: complex

    def r(self, arm: int, which: Which):
        return getattr(self, f"r{arm}{which}")

    def t(self, arm: int, which: Which):
        return getattr(self, f"t{arm}{which}")


def scatter(arm: ArmConfig, which: Which, omega):
    """Reflection and transmission amplitudes of ``arm`` with its dipole in state ``which``.

    ``omega`` may be a scalar or an array; the result broadcasts accordingly.
    """
    omega_arr = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega_arr)):
        raise ParameterError("omega must be finite")
    cav = arm.cavity
    tr = arm.transition(which)
    dw = omega_arr - cav.omega_c
    dipole = tr.g**2 / (-1j * (dw - tr.delta) + tr.gamma)
    denom = -1j * dw + cav.kappa / 2 + dipole
    r = (-1j * dw + dipole + (cav.kappa_r - cav.kappa_t - cav.kappa_l) / 2) / denom
    t = math.sqrt(cav.kappa_r * cav.kappa_t) / denom
    if np.ndim(r) == 0:
        return complex(r), complex(t)
    return r, t


def scatter_set(arm1: ArmConfig, arm2: ArmConfig, omega) -> ScatterSet:
    r1g, t1g = scatter(arm1, "g", omega)
    r1m, t1m = scatter(arm1, "m", omega)
    r2g, t2g = scatter(arm2, "g", omega)
    r2m, t2m = scatter(arm2, "m", omega)
    return ScatterSet(r1g, t1g, r1m, t1m, r2g, t2g, r2m, t2m)


def cooperativity(arm: ArmConfig, which: Which = "g") -> float:
    """g**2 / (gamma * kappa_total). Reporting only; ``scatter`` never uses it."""
    tr = arm.transition(which)
    return tr.g**2 / (tr.gamma * arm.cavity.kappa)


def critical_coupling_check(cavity: CavityPort) -> float:
    """(kappa_r - kappa_t - kappa_l) / kappa_total; zero at critical coupling."""
    return (cavity.kappa_r - cavity.kappa_t - cavity.kappa_l) / cavity.kappa


def lorentzian_limit(arm: ArmConfig, delta_m: float, which: Which = "g"):
    """On-resonance amplitudes of a critically coupled arm in Lorentzian form.

    Uses the selected transition's ``g`` and ``gamma`` at detuning ``delta_m``.
    The cooperativity here is taken against ``kappa_r`` (equal to half the
    total decay at critical coupling with no loss). With leaky loss the
    transmitted amplitude carries an extra ``sqrt(kappa_t / kappa_r)``.
    """
    cav = arm.cavity
    if abs(critical_coupling_check(cav)) > CRITICAL_COUPLING_RTOL:
        raise ParameterError(
            f"arm is not critically coupled: (kappa_r - kappa_t - kappa_l)/kappa = "
            f"{critical_coupling_check(cav):.3g}"
        )
    tr = arm.transition(which)
    coop = tr.g**2 / (tr.gamma * cav.kappa_r)
    if math.isinf(delta_m):
        lor = 0.0
    else:
        lor = tr.gamma / (tr.gamma + 1j * delta_m)
    cl = coop * lor
    return complex(cl / (1 + cl)), complex(math.sqrt(cav.kappa_t / cav.kappa_r) / (1 + cl))
