import sys

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from ditent.model import ArmConfig, CavityPort, DipoleTransition

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def dit_arm(delta=0.0, omega_c=0.0, m=None):
    """g=20, gamma=0.125, kappa_r=kappa_t=50: the resonant DIT operating point."""
    return ArmConfig(
        CavityPort.critical(100.0, omega_c=omega_c),
        DipoleTransition(20.0, delta, 0.125),
        m or DipoleTransition(0.0),
    )


@pytest.fixture
def arm():
    return dit_arm()


finite = st.floats(-500, 500, allow_nan=False)
rates = st.floats(0.01, 200)


@st.composite
def arms(draw, critical=False):
    kr = draw(rates)
    if critical:
        kl = draw(st.floats(0, 1)) * kr
        kt = kr - kl
    else:
        kt, kl = draw(st.floats(0, 200)), draw(st.floats(0, 200))
    cav = CavityPort(kr, kt, kl, draw(finite))
    g_tr = DipoleTransition(draw(st.floats(0, 100)), draw(finite), draw(st.floats(1e-3, 10)))
    m_tr = DipoleTransition(draw(st.floats(0, 100)), draw(finite), draw(st.floats(1e-3, 10)))
    return ArmConfig(cav, g_tr, m_tr)


@st.composite
def amplitudes(draw, max_abs=0.7):
    r = draw(st.floats(0, max_abs))
    phi = draw(st.floats(0, 2 * np.pi))
    return complex(r * np.cos(phi), r * np.sin(phi))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
