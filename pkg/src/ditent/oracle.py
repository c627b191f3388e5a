"""Brute-force check of the closed form in a truncated Fock basis.

Every output mode of every dipole branch is expanded explicitly as a Fock
vector; detector d2 gets the click projector by dropping its vacuum
component. Nothing here reuses the closed-form overlap algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .model import ScatterSet
from .protocol import NoDetectionError, SystemPair

MODES = ("d1", "d2", "b_out", "d_out")
BRANCHES = ("gg", "gm", "mg", "mm")
TAIL_BOUND = 1e-12
MIN_TRUNCATION = 8

# beamsplitter: a_out -> (d1 + d2)/sqrt2, c_out -> (d1 - d2)/sqrt2
_BS = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


@dataclass(frozen=True)
class TruncatedCoherentState:
    amplitude: complex
    n_max: int

    def __post_init__(self):
        if poisson_tail(abs(self.amplitude) ** 2, self.n_max) >= TAIL_BOUND:
            raise ValueError(f"n_max={self.n_max} too small for |a|^2={abs(self.amplitude) ** 2:.3g}")

    def vector(self) -> np.ndarray:
        return fock_coefficients(self.amplitude, self.n_max)


@dataclass(frozen=True)
class JointState:
    """Branch -> (amplitude weight, output-mode coherent amplitudes)."""

    weights: dict
    modes: dict

    def max_amplitude(self) -> float:
        return max((abs(a) for m in self.modes.values() for a in m.values()), default=0.0)


def poisson_tail(mean: float, n_max: int) -> float:
    """P(N > n_max) for N ~ Poisson(mean)."""
    if mean == 0:
        return 0.0
    return float(poisson.sf(n_max, mean))


def choose_truncation(amplitude: complex) -> int:
    """Smallest n_max >= 8 whose Poisson tail beyond it is below 1e-12."""
    mean = abs(amplitude) ** 2
    n = MIN_TRUNCATION
    while poisson_tail(mean, n) >= TAIL_BOUND:
        n += 1
    return n


def fock_coefficients(a: complex, n_max: int) -> np.ndarray:
    """e^{-|a|^2/2} a^n / sqrt(n!) for n = 0..n_max, computed in log space."""
    n = np.arange(n_max + 1)
    if a == 0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    logmag = -0.5 * abs(a) ** 2 + n * math.log(abs(a)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag + 1j * n * np.angle(a))


def _transfer(s: ScatterSet, x: str, y: str) -> np.ndarray:
    """4x2 linear map (a_in, c_in) -> (d1, d2, b_out, d_out) for branch xy."""
    cavity = np.array(
        [
            [s.r(1, x), 0],  # a_out
            [0, s.r(2, y)],  # c_out
            [s.t(1, x), 0],  # b_out
            [0, s.t(2, y)],  # d_out
        ],
        dtype=complex,
    )
    mix = np.zeros((4, 4), dtype=complex)
    mix[:2, :2] = _BS.T
    mix[2:, 2:] = np.eye(2)
    return mix @ cavity


def evolve(pair: SystemPair, scatter: ScatterSet | None = None) -> JointState:
    if scatter is None:
        scatter = pair.scatter()
    inputs = np.array([pair.alpha, pair.beta], dtype=complex)
    weights, modes = {}, {}
    for x in "gm":
        for y in "gm":
            out = _transfer(scatter, x, y) @ inputs
            weights[x + y] = 0.5
            modes[x + y] = dict(zip(MODES, (complex(v) for v in out)))
    return JointState(weights, modes)


@dataclass(frozen=True)
class OracleResult:
    rho: np.ndarray
    fidelity: float
    efficiency: float
    n_max: int


def measure(state: JointState, n_max: int | None = None) -> OracleResult:
    """Project d2 onto >=1 photon, trace out all fields, return the dipole state.

    Basis order of ``rho`` is gg, gm, mg, mm.
    """
    if n_max is None:
        n_max = choose_truncation(state.max_amplitude())
    vecs = {
        b: {m: fock_coefficients(state.modes[b][m], n_max) for m in MODES} for b in BRANCHES
    }
    rho = np.zeros((4, 4), dtype=complex)
    for i, a in enumerate(BRANCHES):
        for j, b in enumerate(BRANCHES):
            # element |a><b| carries <field_b| M |field_a>
            val = state.weights[a] * np.conj(state.weights[b])
            for m in MODES:
                va, vb = vecs[a][m], vecs[b][m]
                if m == "d2":
                    val *= np.vdot(vb[1:], va[1:])
                else:
                    val *= np.vdot(vb, va)
            rho[i, j] = val
    eta = float(np.trace(rho).real)
    if eta <= 0:
        raise NoDetectionError("no detection possible")
    rho = rho / eta
    singlet = np.array([0, 1, -1, 0]) / math.sqrt(2)
    fid = float(np.real(singlet @ rho @ singlet))
    return OracleResult(rho=rho, fidelity=fid, efficiency=eta, n_max=n_max)


def random_scatter_set(rng: np.random.Generator) -> ScatterSet:
    """Physical coefficients: |r|^2 + |t|^2 <= 1, uniform phases."""
    vals = {}
    for arm in (1, 2):
        for x in "gm":
            total = rng.uniform(0, 1)
            share = rng.uniform(0, 1)
            mag_r = math.sqrt(total * share)
            mag_t = math.sqrt(total * (1 - share))
            vals[f"r{arm}{x}"] = mag_r * np.exp(2j * np.pi * rng.uniform())
            vals[f"t{arm}{x}"] = mag_t * np.exp(2j * np.pi * rng.uniform())
    return ScatterSet(**{k: complex(v) for k, v in vals.items()})


def random_amplitude(rng: np.random.Generator, max_abs: float = 0.7) -> complex:
    return complex(max_abs * math.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform()))
