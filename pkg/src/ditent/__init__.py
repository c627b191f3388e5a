"""Entanglement of two dipole-cavity systems by dipole-induced transparency.

Steady-state scattering, exact fidelity and efficiency for coherent inputs,
a truncated-Fock oracle, weak-excitation limits and a fidelity optimizer.
"""

from .model import (
    ArmConfig, CavityPort, DipoleTransition, ParameterError, ScatterSet,
    cooperativity, critical_coupling_check, lorentzian_limit, scatter, scatter_set,
)
from .protocol import (
    MatchingError, NoDetectionError, ProtocolResult, SystemPair, detector_amplitudes, evaluate,
    fidelity_efficiency, first_order_fidelity, first_order_state, matched_pair, matching_amplitudes,
    second_matching_amplitudes,
)
from .limits import (
    BiexcitonScenario, PulseContext, coherence_figures, excitation_probability, matched_pair_limit,
    weak_limit_flux,
)
from .optimize import (
    NoSignalError, OptimizationProblem, OptimizationReport, biexciton_fidelity_map, detuned_arms,
    fidelity_surface, fidelity_vs_frequency, optimize_fidelity, optimize_ratio,
)

__version__ = "0.1.0"
