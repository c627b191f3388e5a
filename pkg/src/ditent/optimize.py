"""Fidelity maximization over laser frequency and the complex input ratio alpha/beta.

The search is deterministic. A coarse grid over (omega, Re, Im) of the ratio,
seeded with the analytic first- and second-matching ratios and with extra
frequencies at every cavity and dipole line, is followed by a per-frequency
pattern search in the ratio plane and then bounded Nelder-Mead from the local
maxima of that frequency profile. Candidate amplitudes are rescaled so the
mean reflected photon number stays at ``reflected_photons``; the objective is
therefore a function of the ratio alone.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .model import ArmConfig, DipoleTransition, ScatterSet, scatter_set
from .protocol import evaluate
from .limits import BiexcitonScenario

DEFAULT_GRID = (121, 21, 21)
DEFAULT_PHOTONS = 1e-6
MIN_SIGNAL = 1e-24  # reflected photon number below which a point is dark
MAX_RATIO_BOX = 100.0
REGIME_TOL = 0.05


class NoSignalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OptimizationProblem:
    arm1: ArmConfig
    arm2: ArmConfig
    omega_range: tuple
    ratio_re: tuple
    ratio_im: tuple
    reflected_photons: float = DEFAULT_PHOTONS
    grid: tuple = DEFAULT_GRID
    starts: int = 8

    def __post_init__(self):
        for name in ("omega_range", "ratio_re", "ratio_im"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name} must be a finite, ordered interval, got {(lo, hi)}")
        if not self.reflected_photons > 0:
            raise ValueError("reflected_photons must be > 0")
        if len(self.grid) != 3 or min(self.grid) < 1:
            raise ValueError("grid must hold three positive sizes")

    @classmethod
    def auto(cls, arm1: ArmConfig, arm2: ArmConfig, **kw) -> "OptimizationProblem":
        """Problem with a search box derived from the arms (overridable by keyword)."""
        box = default_search_box(arm1, arm2, kw.get("grid", DEFAULT_GRID)[0], kw.get("omega_range"))
        box.update({k: v for k, v in kw.items() if v is not None})
        return cls(arm1=arm1, arm2=arm2, **box)


def detuned_arms(base: ArmConfig, separation: float, offset1: float, offset2: float,
                 base2: ArmConfig | None = None):
    """Arms with cavities at -separation/2 and +separation/2 around the reference.

    ``offset1``/``offset2`` place each g-transition relative to the reference
    (not to its own cavity). The m-transitions keep their offset from the
    reference given by ``base``.
    """
    out = []
    for arm, omega_c, offset in ((base, -separation / 2, offset1), (base2 or base, separation / 2, offset2)):
        moved = arm.shifted(omega_c)
        g_tr = DipoleTransition(moved.g_transition.g, offset - omega_c, moved.g_transition.gamma)
        out.append(ArmConfig(moved.cavity, g_tr, moved.m_transition))
    return tuple(out)


def matching_seeds(s: ScatterSet):
    """First- and second-matching ratios alpha/beta (nan where singular)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(np.abs(s.r1g) > 1e-12, s.r2g / np.where(s.r1g == 0, 1, s.r1g), np.nan)
        second = np.where(np.abs(s.r1m) > 1e-12, s.r2m / np.where(s.r1m == 0, 1, s.r1m), np.nan)
    return first, second


def default_search_box(arm1: ArmConfig, arm2: ArmConfig, n_omega: int = DEFAULT_GRID[0],
                       omega_range: tuple | None = None) -> dict:
    if omega_range is None:
        points = []
        for arm in (arm1, arm2):
            points += [arm.cavity.omega_c, arm.cavity.omega_c + arm.g_transition.delta]
        kappa = max(arm1.cavity.kappa, arm2.cavity.kappa)
        omega_range = (min(points) - kappa, max(points) + kappa)
    omegas = np.linspace(*omega_range, n_omega)
    seeds = np.concatenate(matching_seeds(scatter_set(arm1, arm2, omegas)))
    mags = np.abs(seeds[np.isfinite(seeds)])
    mags = mags[mags <= MAX_RATIO_BOX]
    half = max(2.0, 1.25 * float(mags.max())) if mags.size else 2.0
    half = min(half, MAX_RATIO_BOX)
    return {"omega_range": tuple(float(v) for v in omega_range), "ratio_re": (-half, half), "ratio_im": (-half, half)}


def _objective(problem: OptimizationProblem, omega, ratio, scatter: ScatterSet | None = None):
    """Fidelity at the normalized amplitude scale; 0 where no light is reflected."""
    s = scatter if scatter is not None else scatter_set(problem.arm1, problem.arm2, omega)
    alpha0 = np.asarray(ratio, dtype=complex)
    refl = (np.abs(alpha0) ** 2 * (np.abs(s.r1g) ** 2 + np.abs(s.r1m) ** 2)
            + np.abs(s.r2g) ** 2 + np.abs(s.r2m) ** 2) / 2
    dark = refl < MIN_SIGNAL
    scale = np.sqrt(problem.reflected_photons / np.where(dark, 1.0, refl))
    fid, eta = evaluate(alpha0 * scale, scale + 0j, s)
    fid = np.where(dark | ~np.isfinite(fid), 0.0, fid)
    return fid, eta, alpha0 * scale, scale, dark


@dataclass(frozen=True)
class TracePoint:
    stage: str
    omega: float
    ratio: complex
    fidelity: float


@dataclass
class OptimizationReport:
    omega: float
    ratio: complex
    fidelity: float
    efficiency: float
    alpha: complex
    beta: complex
    regime: str
    trace: list = field(default_factory=list, repr=False)

    def to_dict(self, include_trace: bool = True) -> dict:
        out = {
            "omega": self.omega,
            "ratio": [self.ratio.real, self.ratio.imag],
            "fidelity": self.fidelity,
            "efficiency": self.efficiency,
            "alpha": [self.alpha.real, self.alpha.imag],
            "beta": [self.beta.real, self.beta.imag],
            "regime": self.regime,
        }
        if include_trace:
            out["trace"] = [
                {"stage": p.stage, "omega": p.omega, "ratio": [p.ratio.real, p.ratio.imag], "fidelity": p.fidelity}
                for p in self.trace
            ]
        return out


def classify_regime(s: ScatterSet, alpha: complex, beta: complex) -> str:
    def residual(a, b):
        scale = abs(a) + abs(b)
        return abs(a - b) / scale if scale > 1e-12 else math.inf

    first = residual(alpha * s.r1g, beta * s.r2g)
    second = residual(alpha * s.r1m, beta * s.r2m)
    if first < REGIME_TOL and first <= second:
        return "first"
    if second < REGIME_TOL:
        return "second"
    return "intermediate"


def _unit(lo, hi, x):
    return 0.0 if hi == lo else (x - lo) / (hi - lo)


def _refine(fun, starts, n_dims, steps):
    """Bounded Nelder-Mead in the unit cube from each start; best (u, f)."""
    best_u, best_f = None, -math.inf
    for u0 in starts:
        u0 = np.asarray(u0, dtype=float)
        simplex = [u0]
        for k in range(n_dims):
            v = u0.copy()
            v[k] = v[k] + steps[k] if v[k] + steps[k] <= 1 else v[k] - steps[k]
            simplex.append(v)
        res = minimize(
            lambda u: -fun(u), u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * n_dims,
            options={"initial_simplex": np.array(simplex), "xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000},
        )
        u = np.clip(res.x, 0, 1)
        f = fun(u)
        if f > best_f:
            best_u, best_f = u, f
    return best_u, best_f


def _ratio_grid(problem: OptimizationProblem):
    re = np.linspace(*problem.ratio_re, problem.grid[1])
    im = np.linspace(*problem.ratio_im, problem.grid[2])
    return (re[:, None] + 1j * im[None, :]).ravel()


def _in_box(problem, ratio):
    return (np.isfinite(ratio)
            & (ratio.real >= problem.ratio_re[0]) & (ratio.real <= problem.ratio_re[1])
            & (ratio.imag >= problem.ratio_im[0]) & (ratio.imag <= problem.ratio_im[1]))


def _candidates(problem: OptimizationProblem, omegas: np.ndarray):
    """Fidelity at every grid ratio plus the matching seeds, per omega.

    Returns (ratios[n_omega, n_cand], fidelity[n_omega, n_cand], any_signal).
    """
    s = scatter_set(problem.arm1, problem.arm2, omegas)
    grid = _ratio_grid(problem)
    first, second = matching_seeds(s)
    seeds = np.stack([np.atleast_1d(first), np.atleast_1d(second)], axis=-1)
    seeds = np.where(_in_box(problem, seeds), seeds, np.nan)
    ratios = np.concatenate([np.broadcast_to(grid, (omegas.size, grid.size)), seeds], axis=1)
    fid, _, _, _, dark = _objective(problem, None, np.nan_to_num(ratios), _broadcast_scatter(s))
    fid = np.where(np.isnan(ratios), -np.inf, fid)
    return ratios, fid, bool(np.any(~dark & ~np.isnan(ratios)))


def _broadcast_scatter(s: ScatterSet) -> ScatterSet:
    return ScatterSet(*(np.atleast_1d(getattr(s, f))[:, None] for f in ScatterSet.__dataclass_fields__))


def _profile_ratios(problem: OptimizationProblem, omegas: np.ndarray, centers: np.ndarray,
                    max_rounds: int = 80):
    """Best ratio at each frequency by a vectorized shrinking pattern search.

    At fixed frequency the weak-field objective has disc-shaped superlevel
    sets in the ratio plane, so a local search from any start converges to the
    single maximum inside the box.
    """
    (re_lo, re_hi), (im_lo, im_hi) = problem.ratio_re, problem.ratio_im
    s = _broadcast_scatter(scatter_set(problem.arm1, problem.arm2, omegas))
    k = np.linspace(-1.0, 1.0, 9)
    dx = (k[:, None] + 0 * k[None, :]).ravel()
    dy = (0 * k[:, None] + k[None, :]).ravel()
    h_re = np.full(omegas.size, 2 * (re_hi - re_lo) / max(problem.grid[1] - 1, 1))
    h_im = np.full(omegas.size, 2 * (im_hi - im_lo) / max(problem.grid[2] - 1, 1))
    c = centers.astype(complex).copy()
    best = _objective(problem, None, c[:, None], s)[0][:, 0]
    tol_re = 1e-9 * max(re_hi - re_lo, 1e-300)
    tol_im = 1e-9 * max(im_hi - im_lo, 1e-300)
    for _ in range(max_rounds):
        active = (h_re > tol_re) | (h_im > tol_im)
        if not active.any():
            break
        cand = (np.clip(c.real[:, None] + h_re[:, None] * dx, re_lo, re_hi)
                + 1j * np.clip(c.imag[:, None] + h_im[:, None] * dy, im_lo, im_hi))
        f = _objective(problem, None, cand, s)[0]
        j = np.argmax(f, axis=1)
        fj = f[np.arange(omegas.size), j]
        better = fj > best
        c = np.where(better, cand[np.arange(omegas.size), j], c)
        best = np.where(better, fj, best)
        edge = better & ((np.abs(dx[j]) == 1) | (np.abs(dy[j]) == 1))
        h_re = np.where(edge, h_re, h_re / 2)
        h_im = np.where(edge, h_im, h_im / 2)
    return c, best


def _omega_candidates(problem: OptimizationProblem) -> np.ndarray:
    """Uniform grid plus the cavity and dipole lines, where narrow features live."""
    w_lo, w_hi = problem.omega_range
    lines = []
    for arm in (problem.arm1, problem.arm2):
        wc = arm.cavity.omega_c
        lines += [wc, wc + arm.g_transition.delta, wc + arm.m_transition.delta]
    kappa = max(problem.arm1.cavity.kappa, problem.arm2.cavity.kappa)
    offsets = kappa * np.array([0.0, -0.01, 0.01, -0.04, 0.04])
    extra = (np.array(lines)[:, None] + offsets).ravel()
    omegas = np.concatenate([np.linspace(w_lo, w_hi, problem.grid[0]), extra])
    return np.unique(omegas[(omegas >= w_lo) & (omegas <= w_hi)])


def optimize_fidelity(problem: OptimizationProblem) -> OptimizationReport:
    w_lo, w_hi = problem.omega_range
    omegas = _omega_candidates(problem)
    ratios, fid, signal = _candidates(problem, omegas)
    if not signal:
        raise NoSignalError("no detectable signal: reflections vanish across the search box")
    trace = [
        TracePoint("grid", float(w), complex(r), float(f))
        for w, rs, fs in zip(omegas, ratios, fid)
        for r, f in zip(rs, fs)
        if np.isfinite(f)
    ]
    per_omega = np.argmax(fid, axis=1)
    prof_ratio, prof_fid = _profile_ratios(problem, omegas, ratios[np.arange(omegas.size), per_omega])
    trace += [TracePoint("profile", float(w), complex(r), float(f)) for w, r, f in zip(omegas, prof_ratio, prof_fid)]

    (re_lo, re_hi), (im_lo, im_hi) = problem.ratio_re, problem.ratio_im
    # start from every local maximum of the profile along omega, best first
    padded = np.concatenate([[-np.inf], prof_fid, [-np.inf]])
    peaks = np.flatnonzero((padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:]))
    order = peaks[np.argsort(-prof_fid[peaks], kind="stable")][: problem.starts]
    starts = [
        (_unit(w_lo, w_hi, omegas[i]), _unit(re_lo, re_hi, prof_ratio[i].real), _unit(im_lo, im_hi, prof_ratio[i].imag))
        for i in order
    ]

    def point(u):
        return (w_lo + u[0] * (w_hi - w_lo), complex(re_lo + u[1] * (re_hi - re_lo), im_lo + u[2] * (im_hi - im_lo)))

    def fun(u):
        w, r = point(u)
        f = float(_objective(problem, w, r)[0])
        trace.append(TracePoint("refine", float(w), r, f))
        return f

    steps = [0.5 / max(n - 1, 1) for n in problem.grid]
    u_best, f_best = _refine(fun, starts, 3, steps)
    i0 = int(order[0])
    if prof_fid[i0] > f_best:
        w, r = float(omegas[i0]), complex(prof_ratio[i0])
    else:
        w, r = point(u_best)
    return _report(problem, w, r, trace)


def _report(problem, omega, ratio, trace):
    s = scatter_set(problem.arm1, problem.arm2, omega)
    fid, eta, alpha, beta, _ = _objective(problem, omega, ratio, s)
    alpha, beta = complex(alpha), complex(beta)
    return OptimizationReport(
        omega=float(omega), ratio=complex(ratio), fidelity=float(fid), efficiency=float(eta),
        alpha=alpha, beta=beta, regime=classify_regime(s, alpha, beta), trace=trace,
    )


def optimize_ratio(problem: OptimizationProblem, omega: float) -> OptimizationReport:
    """Best ratio at a fixed laser frequency."""
    omegas = np.array([float(omega)])
    ratios, fid, signal = _candidates(problem, omegas)
    if not signal:
        raise NoSignalError(f"no detectable signal at omega={omega}")
    trace = [TracePoint("grid", float(omega), complex(r), float(f)) for r, f in zip(ratios[0], fid[0]) if np.isfinite(f)]
    j = int(np.argmax(fid[0]))
    prof_ratio, prof_fid = _profile_ratios(problem, omegas, ratios[:, j])
    r, f = complex(prof_ratio[0]), float(prof_fid[0])
    trace.append(TracePoint("profile", float(omega), r, f))
    return _report(problem, float(omega), r, trace)


@dataclass(frozen=True)
class FrequencyCurve:
    omega: np.ndarray
    fidelity: np.ndarray
    ratio: np.ndarray


def fidelity_vs_frequency(problem: OptimizationProblem, omegas) -> FrequencyCurve:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    ratios, fid, _ = _candidates(problem, omegas)
    start = ratios[np.arange(omegas.size), np.argmax(fid, axis=1)]
    ratio, best = _profile_ratios(problem, omegas, start)
    return FrequencyCurve(omega=omegas, fidelity=best, ratio=ratio)


@dataclass(frozen=True)
class Surface:
    """Row-major fidelity matrix with its axes."""

    row_name: str
    rows: np.ndarray
    col_name: str
    cols: np.ndarray
    values: np.ndarray


def _map(fn, items, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _surface_cell(args):
    base, separation, offset1, offset2, kw = args
    arm1, arm2 = detuned_arms(base, separation, offset1, offset2)
    return optimize_fidelity(OptimizationProblem.auto(arm1, arm2, **kw)).fidelity


def fidelity_surface(base: ArmConfig, separations, offsets1, offset2: float = 0.0,
                     workers: int = 1, **problem_kw) -> Surface:
    """Optimized fidelity for each (dipole offset 1, cavity separation)."""
    separations = np.asarray(separations, dtype=float)
    offsets1 = np.asarray(offsets1, dtype=float)
    cells = [(base, s, d, offset2, problem_kw) for d in offsets1 for s in separations]
    vals = np.array(_map(_surface_cell, cells, workers)).reshape(offsets1.size, separations.size)
    return Surface("offset1", offsets1, "separation", separations, vals)


def _biexciton_cell(args):
    scenario, d1, d2, omega, optimize_frequency, kw = args
    sc = replace(scenario, delta_XX1=d1, delta_XX2=d2)
    arm1, arm2 = sc.arm(1), sc.arm(2)
    problem = OptimizationProblem.auto(arm1, arm2, **kw)
    if optimize_frequency:
        return optimize_fidelity(problem).fidelity
    return optimize_ratio(problem, omega).fidelity


def biexciton_fidelity_map(scenario: BiexcitonScenario, dxx1, dxx2, omega: float = 0.0,
                           optimize_frequency: bool = False, workers: int = 1, **problem_kw) -> Surface:
    """Fidelity over the two biexciton detunings, with the exciton line still coupled.

    By default the laser stays at the common cavity resonance ``omega`` and
    only the ratio is optimized.
    """
    dxx1 = np.asarray(dxx1, dtype=float)
    dxx2 = np.asarray(dxx2, dtype=float)
    cells = [(scenario, a, b, omega, optimize_frequency, problem_kw) for a in dxx1 for b in dxx2]
    vals = np.array(_map(_biexciton_cell, cells, workers)).reshape(dxx1.size, dxx2.size)
    return Surface("delta_XX1", dxx1, "delta_XX2", dxx2, vals)
