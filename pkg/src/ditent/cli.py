"""Command line entry point.

Exit codes: 0 success, 1 invalid input, 2 computation error, 3 oracle
deviation above tolerance.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import oracle
from .limits import coherence_figures, matched_pair_limit, weak_limit_flux
from .model import ParameterError, cooperativity, scatter_set
from .optimize import NoSignalError, OptimizationProblem, optimize_fidelity, optimize_ratio
from .protocol import MatchingError, NoDetectionError, SystemPair, evaluate, fidelity_efficiency
from .scenario import PRESETS, ConfigError, Scenario, load_scenario, preset_document
from .sweeps import pair_of, run_sweep, to_csv

ORACLE_TOL = 1e-8
EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_ORACLE = 0, 1, 2, 3


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _scenario(args) -> Scenario:
    if args.preset and args.config:
        raise ConfigError("--preset: give either --config or --preset, not both")
    if args.preset:
        return load_scenario(preset_document(args.preset))
    if not args.config:
        raise ConfigError("--config: a scenario file (or --preset) is required")
    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return load_scenario(doc)


def cmd_coeffs(args) -> int:
    sc = _scenario(args)
    omega = sc.laser.omega if args.omega is None else args.omega
    s = scatter_set(sc.arm1, sc.arm2, omega)
    out = {"omega": omega}
    out.update({k: _c(getattr(s, k)) for k in ("r1g", "t1g", "r1m", "t1m", "r2g", "t2g", "r2m", "t2m")})
    out["cooperativity"] = [cooperativity(sc.arm1), cooperativity(sc.arm2)]
    _emit(_json(out), args.out)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    sc = _scenario(args)
    pair, s = pair_of(sc)
    res = fidelity_efficiency(pair, s)
    out = {
        "omega": pair.omega, "alpha": _c(pair.alpha), "beta": _c(pair.beta),
        "fidelity": res.fidelity, "efficiency": res.efficiency,
        "mu": {k: _c(v) for k, v in res.mu.items()},
        "overlaps": {k: _c(v) for k, v in res.overlaps.items()},
        "f1": res.f1, "f2": res.f2,
    }
    _emit(_json(out), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    columns, rows = run_sweep(sc, workers=args.jobs)
    _emit(to_csv(columns, rows), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    sc = _scenario(args)
    problem = OptimizationProblem.auto(sc.arm1, sc.arm2, **sc.optimizer.problem_kw())
    rep = optimize_ratio(problem, sc.laser.omega) if args.fixed_omega else optimize_fidelity(problem)
    out = rep.to_dict(include_trace=not args.summary)
    out["search_box"] = {"omega_range": list(problem.omega_range), "ratio_re": list(problem.ratio_re),
                         "ratio_im": list(problem.ratio_im)}
    _emit(_json(out), args.out)
    return EXIT_OK


def cmd_limits(args) -> int:
    sc = _scenario(args)
    margin = args.margin if args.margin is not None else (sc.limits.margin if sc.limits else 10.0)
    if not margin > 1:
        raise ConfigError(f"--margin: must be > 1, got {margin}")
    checks = []
    out = {"margin": margin, "weak_limit_flux": [weak_limit_flux(sc.arm1), weak_limit_flux(sc.arm2)]}
    if sc.biexciton is not None:
        gamma_x, n_ent = coherence_figures(sc.biexciton)
        out.update(gamma_X=gamma_x, N_ent=n_ent, g_XX2_over_kappa=sc.biexciton.g_XX**2 / sc.biexciton.kappa)
        checks.append({"check": "N_ent > 1", "lhs": 1.0, "rhs": n_ent, "pass": n_ent > 1})
    if sc.limits is not None and (sc.laser.alpha is not None or sc.laser.reflected_photons is not None):
        pair, s = pair_of(sc)
        lim = matched_pair_limit(pair, s, sc.limits.tau_p, margin)
        checks += [
            {"check": "arm1 flux", "lhs": lim.flux1, "rhs": lim.bound1, "pass": lim.arm1_ok},
            {"check": "arm2 flux", "lhs": lim.flux2, "rhs": lim.bound2, "pass": lim.arm2_ok},
            {"check": "reflected rate", "lhs": lim.reflected_rate, "rhs": lim.reflected_bound,
             "pass": lim.reflected_ok},
        ]
    for c in checks:
        c["margin_achieved"] = c["rhs"] / c["lhs"] if c["lhs"] > 0 else math.inf
    out["checks"] = checks
    out["pass"] = all(c["pass"] for c in checks)
    _emit(_json(out), args.out)
    return EXIT_OK


def oracle_check(trials: int, seed: int = 0) -> dict:
    """Max deviation between closed form and Fock oracle over random trials."""
    rng = np.random.default_rng(seed)
    dev_f = dev_eta = 0.0
    done = 0
    while done < trials:
        s = oracle.random_scatter_set(rng)
        alpha, beta = oracle.random_amplitude(rng), oracle.random_amplitude(rng)
        fid, eta = evaluate(alpha, beta, s)
        if not eta > 1e-12:
            continue
        ref = oracle.measure(oracle.evolve(SystemPair(None, None, 0.0, alpha, beta), s))
        dev_f = max(dev_f, abs(fid - ref.fidelity))
        dev_eta = max(dev_eta, abs(eta - ref.efficiency))
        done += 1
    return {"trials": trials, "seed": seed, "max_dev_fidelity": dev_f, "max_dev_efficiency": dev_eta,
            "max_deviation": max(dev_f, dev_eta), "tolerance": ORACLE_TOL}


def cmd_oracle_check(args) -> int:
    if args.trials < 1:
        raise ConfigError(f"--trials: must be >= 1, got {args.trials}")
    out = oracle_check(args.trials, args.seed)
    out["pass"] = out["max_deviation"] <= ORACLE_TOL
    _emit(_json(out), args.out)
    return EXIT_OK if out["pass"] else EXIT_ORACLE


def cmd_preset(args) -> int:
    name = args.name or args.preset
    if not name:
        raise ConfigError(f"preset: a name is required; choose from {', '.join(sorted(PRESETS))}")
    _emit(_json(preset_document(name)), args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors: exit 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ditent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", help="output file (default: stdout)")
        p.set_defaults(func=fn)
        return p

    def scenario_args(p):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="use a built-in scenario")

    p = add("coeffs", cmd_coeffs, "scattering coefficients at the laser frequency")
    scenario_args(p)
    p.add_argument("--omega", type=float, help="override laser frequency (GHz)")
    scenario_args(add("fidelity", cmd_fidelity, "fidelity and efficiency for the configured inputs"))
    p = add("sweep", cmd_sweep, "CSV table over the configured sweep axes")
    scenario_args(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep rows")
    p = add("optimize", cmd_optimize, "maximize fidelity over frequency and input ratio")
    scenario_args(p)
    p.add_argument("--fixed-omega", action="store_true", help="optimize the ratio only, at laser.omega")
    p.add_argument("--summary", action="store_true", help="omit the search trace")
    p = add("limits", cmd_limits, "weak-excitation checks and coherence figures")
    scenario_args(p)
    p.add_argument("--margin", type=float, help="factor applied to every '<<' check")
    p = add("oracle-check", cmd_oracle_check, "closed form vs truncated Fock oracle")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p = add("preset", cmd_preset, "write a built-in scenario file")
    p.add_argument("name", nargs="?", choices=sorted(PRESETS))
    p.add_argument("--preset", choices=sorted(PRESETS), help="same as the positional name")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NoDetectionError, MatchingError, NoSignalError, ArithmeticError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
