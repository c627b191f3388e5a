"""Sweep orchestration, constant-fidelity curves and CSV tables."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .limits import matched_pair_limit
from .model import ArmConfig, ScatterSet, scatter_set
from .optimize import NoSignalError, OptimizationProblem, optimize_fidelity, optimize_ratio
from .protocol import (
    BRANCHES, MatchingError, NoDetectionError, SystemPair, evaluate, fidelity_efficiency,
    matching_amplitudes, second_matching_amplitudes,
)
from .scenario import ConfigError, Laser, Scenario, with_values

BISECT_TOL = 1e-6
BISECT_MAX_ITER = 200
SCAN_PHOTONS = np.logspace(-9, 3, 241)


def resolve_amplitudes(sc: Scenario, s: ScatterSet) -> tuple[complex, complex]:
    """(alpha, beta) from the laser section at the given scattering coefficients."""
    laser = sc.laser
    if laser.reflected_photons is not None:
        if abs(s.r1g) < 1e-12:
            raise MatchingError("r1g ~ 0: cannot set |alpha r1g|^2 from reflected_photons")
        phase = 1.0 if not laser.alpha else laser.alpha / abs(laser.alpha)
        alpha = phase * math.sqrt(laser.reflected_photons) / abs(s.r1g)
    elif laser.alpha is not None:
        alpha = laser.alpha
    else:
        raise ConfigError("laser.alpha: give alpha or reflected_photons to fix the input amplitudes")
    if laser.beta == "auto-match":
        beta = matching_amplitudes(s, alpha)
    elif laser.beta == "auto-match-second":
        beta = second_matching_amplitudes(s, alpha)
    else:
        beta = laser.beta
    return complex(alpha), complex(beta)


def pair_of(sc: Scenario) -> tuple[SystemPair, ScatterSet]:
    s = scatter_set(sc.arm1, sc.arm2, sc.laser.omega)
    alpha, beta = resolve_amplitudes(sc, s)
    return SystemPair(sc.arm1, sc.arm2, sc.laser.omega, alpha, beta), s


@dataclass(frozen=True)
class ConstantFidelityPoint:
    reflected_photons: float
    fidelity: float
    efficiency: float
    reachable: bool
    iterations: int = 0


def _fid_at(sc: Scenario, s: ScatterSet, x: float):
    alpha, beta = resolve_amplitudes(replace(sc, laser=replace(sc.laser, reflected_photons=x)), s)
    return evaluate(alpha, beta, s)


def constant_fidelity_point(sc: Scenario, target: float) -> ConstantFidelityPoint:
    """Bisect on |alpha r1g|^2 for the first crossing of ``target`` from above.

    The fidelity is scanned on a log grid of reflected photon numbers; the
    first bracket where it falls below the target is bisected in log space.
    """
    s = scatter_set(sc.arm1, sc.arm2, sc.laser.omega)
    f = lambda x: _fid_at(sc, s, x)
    fs = np.array([f(x)[0] for x in SCAN_PHOTONS])
    below = np.flatnonzero(~(fs >= target))
    if below.size == 0 or below[0] == 0:
        return ConstantFidelityPoint(math.nan, math.nan, math.nan, False)
    lo, hi = math.log(SCAN_PHOTONS[below[0] - 1]), math.log(SCAN_PHOTONS[below[0]])
    for it in range(1, BISECT_MAX_ITER + 1):
        mid = 0.5 * (lo + hi)
        fid, eta = f(math.exp(mid))
        if abs(fid - target) <= BISECT_TOL:
            return ConstantFidelityPoint(math.exp(mid), fid, eta, True, it)
        if fid >= target:
            lo = mid
        else:
            hi = mid
    return ConstantFidelityPoint(math.exp(mid), fid, eta, False, BISECT_MAX_ITER)


def constant_fidelity_efficiency(target: float, base: ArmConfig, delta1, delta2_values,
                                 omega: float = 0.0, beta: str = "auto-match") -> np.ndarray:
    """Efficiency at fixed fidelity over (delta2, delta1); nan where unreachable.

    Both cavities sit at the same resonance as ``base``; deltas are the
    g-transition detunings of each arm from its cavity.
    """
    out = np.full((len(delta2_values), len(delta1)), np.nan)
    for i, d2 in enumerate(delta2_values):
        for j, d1 in enumerate(delta1):
            arm1 = replace(base, g_transition=replace(base.g_transition, delta=float(d1)))
            arm2 = replace(base, g_transition=replace(base.g_transition, delta=float(d2)))
            sc = Scenario(arm1, arm2, Laser(omega=omega, beta=beta, reflected_photons=1.0))
            p = constant_fidelity_point(sc, target)
            if p.reachable:
                out[i, j] = p.efficiency
    return out


def _columns(sc: Scenario) -> list[str]:
    axes = [a.variable for a in sc.sweep.axes]
    mode = sc.sweep.mode
    amps = ["alpha_re", "alpha_im", "beta_re", "beta_im"]
    if mode == "evaluate":
        cols = axes + amps + ["fidelity", "efficiency"] + [f"abs_mu_{b}" for b in BRANCHES]
        if sc.limits is not None:
            cols += ["bound1", "bound2", "flux1", "flux2", "reflected_rate", "reflected_bound", "limits_pass"]
    elif mode == "optimize_ratio":
        cols = axes + ["ratio_re", "ratio_im"] + amps + ["fidelity", "efficiency", "regime"]
    elif mode == "optimize":
        cols = axes + ["omega_opt", "ratio_re", "ratio_im"] + amps + ["fidelity", "efficiency", "regime"]
    else:
        cols = axes + ["reflected_photons", "fidelity", "efficiency", "bisection_iterations"]
    return cols + ["status"]


def _amp_cells(alpha, beta):
    return {"alpha_re": alpha.real, "alpha_im": alpha.imag, "beta_re": beta.real, "beta_im": beta.imag}


def compute_row(args) -> dict:
    """One sweep row; errors become a status string rather than an exception."""
    sc, values = args
    row = dict(values)
    cur = with_values(sc, values)
    mode = sc.sweep.mode
    try:
        if mode == "evaluate":
            pair, s = pair_of(cur)
            res = fidelity_efficiency(pair, s)
            row.update(_amp_cells(pair.alpha, pair.beta))
            row.update(fidelity=res.fidelity, efficiency=res.efficiency)
            row.update({f"abs_mu_{b}": abs(res.mu[b]) for b in BRANCHES})
            if sc.limits is not None:
                lim = matched_pair_limit(pair, s, sc.limits.tau_p, sc.limits.margin)
                row.update(bound1=lim.bound1, bound2=lim.bound2, flux1=lim.flux1, flux2=lim.flux2,
                           reflected_rate=lim.reflected_rate, reflected_bound=lim.reflected_bound,
                           limits_pass=lim.ok)
        elif mode in ("optimize_ratio", "optimize"):
            problem = OptimizationProblem.auto(cur.arm1, cur.arm2, **cur.optimizer.problem_kw())
            rep = optimize_ratio(problem, cur.laser.omega) if mode == "optimize_ratio" else optimize_fidelity(problem)
            row.update(ratio_re=rep.ratio.real, ratio_im=rep.ratio.imag, fidelity=rep.fidelity,
                       efficiency=rep.efficiency, regime=rep.regime, **_amp_cells(rep.alpha, rep.beta))
            if mode == "optimize":
                row["omega_opt"] = rep.omega
        else:
            p = constant_fidelity_point(cur, sc.sweep.target_fidelity)
            row.update(reflected_photons=p.reflected_photons, fidelity=p.fidelity, efficiency=p.efficiency,
                       bisection_iterations=p.iterations)
            if not p.reachable:
                row["status"] = "unreachable"
                return row
        row["status"] = "ok"
    except NoDetectionError:
        row["status"] = "no-detection"
    except MatchingError:
        row["status"] = "matching-singular"
    except NoSignalError:
        row["status"] = "no-signal"
    return row


def grid_points(sc: Scenario) -> list[dict]:
    """Row-major grid over the declared axes (last axis fastest)."""
    axes = sc.sweep.axes
    return [dict(zip((a.variable for a in axes), combo)) for combo in itertools.product(*(a.values for a in axes))]


def run_sweep(sc: Scenario, workers: int = 1) -> tuple[list[str], list[dict]]:
    if sc.sweep is None:
        raise ConfigError("sweep: section required for the sweep command")
    tasks = [(sc, v) for v in grid_points(sc)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(compute_row, tasks))
    else:
        rows = [compute_row(t) for t in tasks]
    return _columns(sc), rows


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def to_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_cell(r.get(c)) for c in columns])
    return buf.getvalue()
