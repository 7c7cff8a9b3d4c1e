"""Shared fixtures: small meshes, materials, and cached converged runs."""
import math

import numpy as np
import pytest

from filmlab.elasticity import Materials
from filmlab.energy import Tensions
from filmlab.flow import FlowConfig, minimize
from filmlab.geometry import Profile, make_profile


def island(n=400, height=0.1, width=0.5, a=0.0, b=1.0):
    """Rectangle island centred in ``[a, b]`` on ``n`` intervals."""
    x = np.linspace(a, b, n + 1)
    c = 0.5 * (a + b)
    h = np.where(np.abs(x - c) <= 0.5 * width + 1e-9 * (b - a), height, 0.0)
    return Profile(x, h)


def tent(a=0.0, b=2.0, n=20, c=None, half=1.0, height=1.0):
    x = np.linspace(a, b, n + 1)
    c = 0.5 * (a + b) if c is None else c
    return Profile(x, height * np.maximum(0.0, 1.0 - np.abs(x - c) / half))


@pytest.fixture
def soft_film():
    """Film softer than substrate (quasi-monotone), mismatch 0.05."""
    return Materials(1.0, 1.0, 2.0, 2.0, e0=0.05)


_RUNS = {}


def converged_cap(beta, n=400):
    """Surface-only (e0 = 0) minimiser from the rectangle island, cached per session."""
    key = (beta, n)
    if key not in _RUNS:
        t = Tensions.from_beta(beta)
        mat = Materials(1.0, 1.0, 2.0, 2.0, e0=0.0)
        _RUNS[key] = (minimize(island(n), mat, t, FlowConfig()), mat, t)
    return _RUNS[key]


@pytest.fixture(scope="session")
def cap_half():
    return converged_cap(0.5)


def wrong_angle_cap(theta_deg, half_width, n=400, a=0.0, b=1.0):
    """Circular cap with contact angle ``theta_deg``, centred in ``[a, b]``.

    The half width is rounded to the grid so both contact points are nodes.
    Returns the profile and its half width.
    """
    th = math.radians(theta_deg)
    dx = (b - a) / n
    half = round(half_width / dx) * dx
    R = half / math.sin(th)
    x = np.linspace(a, b, n + 1)
    c = 0.5 * (a + b)
    h = np.sqrt(np.maximum(R * R - (x - c) ** 2, 0.0)) - R * math.cos(th)
    h[np.abs(x - c) >= half - 1e-12] = 0.0
    return Profile(x, np.maximum(h, 0.0)), half


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
