import copy
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ditent.scenario import PRESETS, ConfigError, load_scenario, preset_document, preset_scenario, with_values
from ditent.sweeps import (
    BISECT_TOL, compute_row, constant_fidelity_efficiency, constant_fidelity_point, format_cell, grid_points,
    pair_of, resolve_amplitudes, run_sweep, to_csv,
)
from ditent.model import scatter_set
from ditent.protocol import evaluate

from conftest import dit_arm


def _doc(**over):
    doc = preset_document("dit-resonant")
    doc.pop("sweep")
    doc.update(over)
    return doc


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_load(name):
    sc = preset_scenario(name)
    assert sc.preset == name
    assert preset_document(name) == PRESETS[name]
    assert preset_document(name) is not PRESETS[name]


def test_preset_parameter_sets():
    sc = preset_scenario("dit-resonant")
    assert sc.arm1 == dit_arm()
    bx = preset_scenario("biexciton")
    assert bx.arm1.cavity.kappa == 50 and bx.biexciton.T2 == 2.0


@pytest.mark.parametrize(
    "mutate, key",
    [
        (lambda d: d.update(extra=1), "<root>"),
        (lambda d: d["arm1"]["cavity"].update(kappa_x=1), "arm1.cavity"),
        (lambda d: d["arm1"]["cavity"].update(kappa_r=-1), "arm1.cavity"),
        (lambda d: d["arm2"]["g_transition"].update(gamma=0), "arm2.g_transition"),
        (lambda d: d["arm1"]["cavity"].update(kappa_r="big"), "arm1.cavity.kappa_r"),
        (lambda d: d.pop("arm2"), "arm2"),
        (lambda d: d["laser"].update(alpha=0.1), "laser.reflected_photons"),
        (lambda d: d["laser"].update(reflected_photons=0), "laser.reflected_photons"),
        (lambda d: d["laser"].update(beta=[0.1, 0.2], reflected_photons=None) or d["laser"].pop("reflected_photons"),
         "laser.alpha"),
        (lambda d: d["laser"].update(beta="auto"), "laser.beta"),
        (lambda d: d["limits"].update(margin=1.0), "limits.margin"),
        (lambda d: d["limits"].update(tau_p=0), "limits.tau_p"),
        (lambda d: d.update(biexciton=preset_document("biexciton")["biexciton"]), "arm1"),
        (lambda d: d.update(optimizer={"omega_range": [5, -5]}), "optimizer.omega_range"),
    ],
)
def test_keyed_validation(mutate, key):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ConfigError) as exc:
        load_scenario(doc)
    assert str(exc.value).startswith(key)


@pytest.mark.parametrize(
    "sweep, key",
    [
        ({"mode": "constant_fidelity", "axes": [{"variable": "arm1.delta", "values": [0]}]}, "sweep.target_fidelity"),
        ({"mode": "constant_fidelity", "target_fidelity": 1.5, "axes": [{"variable": "arm1.delta", "values": [0]}]},
         "sweep.target_fidelity"),
        ({"mode": "optimize", "axes": [{"variable": "omega", "values": [0]}]}, "sweep.axes"),
        ({"mode": "optimize_ratio", "axes": [{"variable": "reflected_photons", "values": [1]}]}, "sweep.axes"),
        ({"axes": [{"variable": "dot_shift1", "values": [0]}]}, "sweep.axes.0.variable"),
        ({"axes": [{"variable": "arm1.delta", "values": [0]}, {"variable": "offset1", "values": [0]}]}, "sweep.axes"),
        ({"axes": [{"variable": "omega", "values": [0]}, {"variable": "omega", "values": [1]}]}, "sweep.axes"),
        ({"axes": [{"variable": "nope", "values": [0]}]}, "sweep.axes.0.variable"),
        ({"axes": [{"variable": "omega", "start": 0, "stop": 1, "steps": 0}]}, "sweep.axes.0.steps"),
        ({"axes": [{"variable": "omega", "start": -1, "stop": 1, "steps": 3, "scale": "log"}]}, "sweep.axes.0"),
    ],
)
def test_keyed_sweep_validation(sweep, key):
    with pytest.raises(ConfigError) as exc:
        load_scenario(_doc(sweep=sweep))
    assert str(exc.value).startswith(key)


def test_axis_ranges():
    sc = load_scenario(_doc(sweep={"axes": [
        {"variable": "reflected_photons", "start": 1e-3, "stop": 10, "steps": 5, "scale": "log"},
        {"variable": "omega", "start": -1, "stop": 1, "steps": 3}]}))
    assert sc.sweep.shape == (5, 3)
    np.testing.assert_allclose(sc.sweep.axes[0].values, np.logspace(-3, 1, 5), rtol=1e-14)
    assert list(sc.sweep.axes[1].values) == [-1.0, 0.0, 1.0]


def test_grid_is_row_major():
    sc = load_scenario(_doc(sweep={"axes": [
        {"variable": "arm1.delta", "values": [0, 10]}, {"variable": "omega", "values": [1, 2, 3]}]}))
    pts = grid_points(sc)
    assert len(pts) == 6
    assert [(p["arm1.delta"], p["omega"]) for p in pts[:4]] == [(0, 1), (0, 2), (0, 3), (10, 1)]


def test_with_values_frame():
    sc = preset_scenario("cavity-detuning")
    cur = with_values(sc, {"cavity_separation": 40.0, "offset1": -30.0})
    assert cur.arm1.cavity.omega_c == -20 and cur.arm2.cavity.omega_c == 20
    assert cur.arm1.cavity.omega_c + cur.arm1.g_transition.delta == -30
    assert cur.arm2.cavity.omega_c + cur.arm2.g_transition.delta == 0


def test_with_values_dot_shift_moves_both_lines():
    sc = preset_scenario("biexciton")
    cur = with_values(sc, {"dot_shift1": -50.0})
    assert cur.arm1.g_transition.delta == -50.0
    assert cur.arm1.m_transition.delta == 200.0
    assert cur.arm2 == sc.arm2


def test_reflected_photons_sets_alpha():
    sc = load_scenario(_doc(laser={"omega": 3.0, "reflected_photons": 0.04}))
    pair, s = pair_of(sc)
    assert abs(pair.alpha * s.r1g) ** 2 == pytest.approx(0.04, rel=1e-14)
    assert pair.alpha * s.r1g == pytest.approx(pair.beta * s.r2g, abs=1e-15)


def test_numeric_beta_scales_with_alpha():
    doc = _doc(laser={"alpha": [0.2, 0.0], "beta": [0.1, 0.1]})
    sc = load_scenario(doc)
    a, b = resolve_amplitudes(sc, scatter_set(sc.arm1, sc.arm2, 0.0))
    assert (a, b) == (0.2, 0.1 + 0.1j)


def test_constant_fidelity_point_hits_target():
    sc = load_scenario(_doc(laser={"beta": "auto-match", "reflected_photons": 1.0}))
    p = constant_fidelity_point(sc, 0.85)
    assert p.reachable and abs(p.fidelity - 0.85) <= BISECT_TOL
    assert p.iterations <= 200
    s = scatter_set(sc.arm1, sc.arm2, 0.0)
    alpha = math.sqrt(p.reflected_photons) / abs(s.r1g)
    assert evaluate(alpha, alpha * s.r1g / s.r2g, s)[0] == pytest.approx(p.fidelity, abs=1e-12)


@pytest.mark.parametrize("target", [1.0, 0.3])
def test_constant_fidelity_unreachable(target):
    # 1.0 is only the zero-amplitude limit; 0.3 lies below the strong-field floor of 0.5
    sc = load_scenario(_doc(laser={"beta": "auto-match", "reflected_photons": 1.0}))
    assert not constant_fidelity_point(sc, target).reachable


def test_constant_fidelity_unreachable_row_is_flagged():
    doc = _doc(sweep={"mode": "constant_fidelity", "target_fidelity": 1.0,
                      "axes": [{"variable": "arm1.delta", "values": [0.0]}]})
    doc["laser"] = {"beta": "auto-match"}
    cols, rows = run_sweep(load_scenario(doc))
    assert rows[0]["status"] == "unreachable"
    assert to_csv(cols, rows).splitlines()[1].endswith("unreachable")


def test_constant_fidelity_grid_matches_points():
    eff = constant_fidelity_efficiency(0.85, dit_arm(), [0.0, 50.0], [0.0, 25.0])
    assert eff.shape == (2, 2)
    sc = load_scenario(_doc(laser={"beta": "auto-match", "reflected_photons": 1.0}))
    assert eff[0, 0] == constant_fidelity_point(sc, 0.85).efficiency


def test_sweep_status_on_error():
    doc = _doc(sweep={"axes": [{"variable": "omega", "values": [0.0]}]})
    doc["laser"] = {"alpha": 0.0, "beta": [0.0, 0.0]}
    row = compute_row((load_scenario(doc), {"omega": 0.0}))
    assert row["status"] == "no-detection"


def test_resonant_preset_sweep():
    cols, rows = run_sweep(preset_scenario("dit-resonant"))
    assert len(rows) == 51
    fid = [r["fidelity"] for r in rows]
    assert fid[0] >= 0.999 and abs(fid[-1] - 0.5) <= 0.01
    assert all(r["limits_pass"] in (True, False) for r in rows)
    assert cols[0] == "reflected_photons" and cols[-1] == "status"


def test_parallel_sweep_is_identical():
    sc = preset_scenario("frequency-scan")
    small = load_scenario({**preset_document("frequency-scan"), "sweep": {"mode": "optimize_ratio", "axes": [
        {"variable": "offset1", "values": [-50.0, 50.0]}, {"variable": "omega", "values": [-10.0, 0.0, 10.0]}]}})
    assert sc.sweep.shape == (3, 301)
    assert to_csv(*run_sweep(small, workers=1)) == to_csv(*run_sweep(small, workers=3))


@pytest.mark.parametrize("v, text", [(0.1, "0.10000000000000001"), (1.0, "1"), (True, "true"), (np.False_, "false"),
                                     (3, "3"), (None, ""), ("ok", "ok"), (math.nan, "nan")])
def test_format_cell(v, text):
    assert format_cell(v) == text


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_format_cell_round_trips(x):
    assert float(format_cell(x)) == x


def test_csv_quoting():
    text = to_csv(["a", "b"], [{"a": "x,y", "b": 1.5}])
    assert text == 'a,b\n"x,y",1.5\n'


def test_documents_are_independent_copies():
    doc = preset_document("biexciton")
    doc["biexciton"]["kappa"] = 1.0
    assert PRESETS["biexciton"]["biexciton"]["kappa"] == 50.0
    assert copy.deepcopy(PRESETS) == {n: preset_document(n) for n in PRESETS}
