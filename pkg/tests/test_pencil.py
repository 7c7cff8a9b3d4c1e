import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from filmlab.elasticity import Materials
from filmlab.errors import BadSpec
from filmlab.pencil import (
    SectorSpec,
    assemble_pencil,
    predicted_decay,
    singular_exponents,
    williams_exponents,
)

HOMOG = Materials(1.0, 1.0, 1.0, 1.0)
QM = Materials(1.0, 1.0, 2.0, 2.0)


def _positive(rep, lo=1e-6):
    z = rep.exponents
    return np.sort(z.real[(z.real > lo) & (np.abs(z.imag) < 1e-9)])


def test_williams_oracle_crack():
    r = williams_exponents(2 * math.pi)
    assert r[0] == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(r[:3], [0.5, 1.0, 1.5], atol=1e-10)


def test_crack_exponent_matches_characteristic_root():
    rep = singular_exponents(assemble_pencil(SectorSpec.wedge(2 * math.pi), HOMOG, 128))
    assert abs(rep.min_positive_real - williams_exponents(2 * math.pi)[0]) <= 1e-4
    assert not rep.tau_condition  # a crack lies outside the cone hypothesis


def test_reentrant_wedge_matches_williams():
    omega = 1.5 * math.pi
    rep = singular_exponents(assemble_pencil(SectorSpec.wedge(omega), HOMOG, 256))
    w = williams_exponents(omega, alpha_max=1.0 - 1e-6)
    pos = _positive(rep)
    for root in w:
        assert np.min(np.abs(pos - root)) <= 1e-3
    assert abs(rep.min_positive_real - w[0]) <= 1e-4


def test_half_plane_exponents():
    rep = singular_exponents(assemble_pencil(SectorSpec.wedge(math.pi), HOMOG, 128))
    z = rep.exponents.real
    assert np.any(z == 0.0)
    assert np.any(np.abs(z - 1.0) <= 1e-3)
    # nothing strictly inside (0, 1) beyond discretisation error near 1
    assert not np.any((z > 1e-6) & (z < 1.0 - 1e-3))
    assert predicted_decay(SectorSpec.wedge(math.pi), HOMOG, 128) == pytest.approx(1.0, abs=1e-3)


def test_assembly_structure():
    pen = assemble_pencil(SectorSpec.wedge(2 * math.pi), HOMOG, 32)
    assert np.allclose(pen.A2, pen.A2.T, atol=1e-14)
    assert np.allclose(pen.A0, pen.A0.T, atol=1e-14)
    assert np.allclose(pen.A1, -pen.A1.T, atol=1e-14)
    assert pen.size == 2 * (len(pen.nodes))


def test_translations_in_kernel_at_zero():
    pen = assemble_pencil(SectorSpec.border(math.pi / 3), QM, 64)
    n = len(pen.nodes)
    for comp in (0, 1):
        v = np.zeros(2 * n)
        v[comp::2] = 1.0
        assert np.abs(pen(0.0) @ v).max() <= 1e-12


def test_quasi_monotone_flat_contact():
    rep = singular_exponents(assemble_pencil(SectorSpec.border(math.pi / 3), QM, 128))
    z = rep.exponents
    assert not np.any((z.real > 1e-6) & (z.real <= 0.5))
    assert rep.alpha_pred > 0.5
    assert rep.quasi_monotone and rep.tau_condition
    assert 0.5 < predicted_decay(SectorSpec.border(math.pi / 3), QM, 128) <= 1.0


def test_conjugate_symmetry():
    # a stiff film over a soft substrate can produce complex exponents
    rep = singular_exponents(assemble_pencil(SectorSpec(math.pi / 4, math.pi, 1.6 * math.pi), Materials(5, 5, 1, 1), 64), strip=(-3, 3))
    z = rep.exponents
    assert np.any(np.abs(z.imag) > 0.1)
    for w in z[np.abs(z.imag) > 0]:
        assert np.min(np.abs(z - np.conj(w))) <= 1e-8


@pytest.mark.parametrize("spec", [SectorSpec.wedge(2 * math.pi), SectorSpec.wedge(1.5 * math.pi), SectorSpec.border(math.pi / 3)])
def test_refinement_cauchy(spec):
    a = singular_exponents(assemble_pencil(spec, QM, 128)).min_positive_real
    b = singular_exponents(assemble_pencil(spec, QM, 256)).min_positive_real
    assert abs(a - b) <= 1e-4


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 20.0))
def test_material_scaling_invariance(c):
    spec = SectorSpec.border(math.radians(50))
    z1 = singular_exponents(assemble_pencil(spec, QM, 48)).exponents
    z2 = singular_exponents(assemble_pencil(spec, QM.scaled(c), 48)).exponents
    assert z1.shape == z2.shape
    assert np.abs(z1 - z2).max() <= 1e-8


def test_bad_spec():
    with pytest.raises(BadSpec):
        SectorSpec(1.0, 0.5, 2.0)
    with pytest.raises(BadSpec):
        SectorSpec(0.0, 1.0, 7.0)
    with pytest.raises(BadSpec):
        SectorSpec(0.0, float("nan"), 1.0)


def test_tau_condition():
    assert SectorSpec.border(math.pi / 3).tau_condition()
    assert SectorSpec.valley(math.pi / 4).tau_condition()
    assert not SectorSpec.wedge(2 * math.pi).tau_condition()


def test_report_serialises():
    rep = singular_exponents(assemble_pencil(SectorSpec.border(math.pi / 3), QM, 32))
    d = rep.to_dict()
    assert d["quasi_monotone"] is True
    assert d["alpha_pred"] == rep.alpha_pred
