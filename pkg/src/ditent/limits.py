"""Weak-excitation operating limits and exciton-biexciton figures of merit.

"Much less than" is operationalized with a margin factor: a check passes when
``lhs * margin <= rhs``. Times are ns, rates GHz, so 1/ns == GHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ArmConfig, CavityPort, DipoleTransition, ParameterError, ScatterSet, cooperativity
from .protocol import SystemPair

DEFAULT_MARGIN = 10.0


@dataclass(frozen=True)
class PulseContext:
    tau_p: float
    photon_number: float = 0.0
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not (math.isfinite(self.tau_p) and self.tau_p > 0):
            raise ParameterError(f"tau_p must be > 0, got {self.tau_p}")
        if not (math.isfinite(self.margin) and self.margin > 1):
            raise ParameterError(f"margin must be > 1, got {self.margin}")
        if not (math.isfinite(self.photon_number) and self.photon_number >= 0):
            raise ParameterError(f"photon_number must be >= 0, got {self.photon_number}")

    @property
    def flux(self) -> float:
        return self.photon_number / self.tau_p


@dataclass(frozen=True)
class BiexcitonScenario:
    """Quantum-dot ladder: ground (m) -X- exciton (g) -XX- biexciton (e)."""

    g_X: float = 20.0
    g_XX: float = 20.0
    gamma_X: float = 0.125
    delta_X: float = 250.0
    T2: float = 2.0
    kappa: float = 50.0
    delta_XX1: float = 0.0
    delta_XX2: float = 0.0
    gamma_XX: float | None = None

    def __post_init__(self):
        for name in ("g_X", "g_XX", "gamma_X", "T2", "kappa"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be > 0, got {v}")
        for name in ("delta_X", "delta_XX1", "delta_XX2"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.gamma_XX is not None and not self.gamma_XX > 0:
            raise ParameterError(f"gamma_XX must be > 0, got {self.gamma_XX}")

    def arm(self, which: int, omega_c: float = 0.0) -> ArmConfig:
        """Critically coupled arm; the exciton line moves with the dot, keeping ``delta_X`` from XX."""
        shift = self.delta_XX1 if which == 1 else self.delta_XX2
        gamma_xx = self.gamma_X if self.gamma_XX is None else self.gamma_XX
        return ArmConfig(
            cavity=CavityPort.critical(self.kappa, omega_c=omega_c),
            g_transition=DipoleTransition(self.g_XX, shift, gamma_xx),
            m_transition=DipoleTransition(self.g_X, self.delta_X + shift, self.gamma_X),
        )


@dataclass(frozen=True)
class ExcitationEstimate:
    population: float
    cooperativity: float

    @property
    def in_validity_regime(self) -> bool:
        return self.cooperativity > 1

    @property
    def warning(self) -> str | None:
        if self.in_validity_regime:
            return None
        return f"formula outside validity regime: cooperativity {self.cooperativity:.3g} <= 1"


def excitation_probability(arm: ArmConfig, flux: float) -> ExcitationEstimate:
    """Steady-state excited population for an input flux (photons/ns) on the g transition."""
    tr = arm.g_transition
    kappa = arm.cavity.kappa
    denom = tr.g**4 + tr.delta**2 * kappa**2 / 4
    pop = math.inf if denom == 0 and flux > 0 else (tr.g**2 * kappa / denom * flux if denom else 0.0)
    return ExcitationEstimate(population=pop, cooperativity=cooperativity(arm))


def weak_limit_flux(arm: ArmConfig) -> float:
    """Upper bound on input flux (photons/ns): g^2/kappa + kappa delta^2/g^2."""
    tr = arm.g_transition
    kappa = arm.cavity.kappa
    if tr.g == 0:
        return math.inf
    return tr.g**2 / kappa + kappa * tr.delta**2 / tr.g**2


def reflected_rate_limit(arm: ArmConfig) -> float:
    """Bound on the reflected-photon rate, g^2/kappa."""
    return arm.g_transition.g**2 / arm.cavity.kappa


def passes(lhs: float, rhs: float, margin: float = DEFAULT_MARGIN) -> bool:
    return lhs * margin <= rhs


@dataclass(frozen=True)
class MatchedPairLimit:
    bound1: float
    bound2: float
    flux1: float
    flux2: float
    reflected_rate: float
    reflected_bound: float
    margin: float

    @property
    def arm1_ok(self) -> bool:
        return passes(self.flux1, self.bound1, self.margin)

    @property
    def arm2_ok(self) -> bool:
        return passes(self.flux2, self.bound2, self.margin)

    @property
    def reflected_ok(self) -> bool:
        return passes(self.reflected_rate, self.reflected_bound, self.margin)

    @property
    def ok(self) -> bool:
        return self.arm1_ok and self.arm2_ok and self.reflected_ok


def matched_pair_limit(
    pair: SystemPair, scatter: ScatterSet, tau_p: float, margin: float = DEFAULT_MARGIN
) -> MatchedPairLimit:
    """Weak-excitation checks for both inputs and the reflected-photon rate |alpha r1g|^2 / tau_p."""
    PulseContext(tau_p=tau_p, margin=margin)
    return MatchedPairLimit(
        bound1=weak_limit_flux(pair.arm1),
        bound2=weak_limit_flux(pair.arm2),
        flux1=abs(pair.alpha) ** 2 / tau_p,
        flux2=abs(pair.beta) ** 2 / tau_p,
        reflected_rate=abs(pair.alpha * scatter.r1g) ** 2 / tau_p,
        reflected_bound=reflected_rate_limit(pair.arm1),
        margin=margin,
    )


def coherence_figures(s: BiexcitonScenario) -> tuple[float, float]:
    """(Gamma_X in GHz, N_ent).

    Gamma_X = g_X^2 kappa / (delta_X^2 + kappa^2) + gamma_X + 1/T2 and
    N_ent = g_XX^2 / (kappa Gamma_X).
    """
    gamma = s.g_X**2 * s.kappa / (s.delta_X**2 + s.kappa**2) + s.gamma_X + 1.0 / s.T2
    return gamma, s.g_XX**2 / (s.kappa * gamma)
