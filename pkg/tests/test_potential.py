import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resonqdt.potential import (AdiabaticPair, ChannelPotentialMatrix, DomainError, HundsCaseAInput, InputError,
                                ParseError, SyntheticModelParams, build_asymptotic_matrix, diabatic_crossing,
                                load_curves, mixing_angle, morse_levels, morse_model, synthetic_curves)
from resonqdt.units import CM_TO_HARTREE, HARTREE_TO_CM, RB85_REDUCED_MASS, RB_FINE_STRUCTURE_CM


def _samples(n=40):
    R = np.linspace(4.0, 40.0, n)
    va = -0.01 * np.exp(-0.3 * (R - 6.0) ** 2) - 10.0 / R ** 3
    vb = -0.005 * np.exp(-0.3 * (R - 6.5) ** 2) - 10.0 / R ** 3
    aso = np.full(n, 7.2e-4) + 1e-3 / R ** 3
    return R, va, vb, aso


def test_default_split_and_threshold(V):
    assert V.E_open == 0.0
    split = (V.E_closed - V.E_open) * HARTREE_TO_CM
    assert split == pytest.approx(RB_FINE_STRUCTURE_CM, rel=1e-12)


def test_reduced_mass_constant():
    # half the 85Rb atomic mass in electron masses
    assert RB85_REDUCED_MASS == pytest.approx(0.5 * 84.9117897 * 1822.888486, rel=1e-5)


def test_coupling_vanishes_when_curves_coincide():
    R = np.linspace(4.0, 40.0, 60)
    v = -1e-3 / (1 + (R - 8) ** 2)
    inp = HundsCaseAInput(R, v, v.copy(), np.full_like(R, 7e-4))
    V = build_asymptotic_matrix(inp)
    assert np.all(V.voc(np.linspace(4.0, 200.0, 500)) == 0.0)


def test_elements_formula():
    R, va, vb, aso = _samples()
    V = build_asymptotic_matrix(HundsCaseAInput(R, va, vb, aso))
    voo, vcc, voc = V.elements(R)
    # knots are reproduced by the interpolant
    np.testing.assert_allclose(voo, va / 3 + 2 * vb / 3 - aso, rtol=0, atol=1e-14)
    np.testing.assert_allclose(vcc, 2 * va / 3 + vb / 3 + aso / 2, rtol=0, atol=1e-14)
    np.testing.assert_allclose(voc, math.sqrt(2 / 3) * (va - vb), rtol=0, atol=1e-14)


def test_tail_is_inverse_cube():
    R, va, vb, aso = _samples(80)
    V = build_asymptotic_matrix(HundsCaseAInput(R, va, vb, aso))
    Rf = np.array([80.0, 160.0])
    dv = (V.voo(Rf) - V.E_open) * Rf ** 3
    assert dv[0] == pytest.approx(dv[1], rel=1e-12)


def test_diagonal_input_gives_identity_mixing():
    R = np.linspace(4.0, 40.0, 50)

    def curves(r):
        r = np.asarray(r, dtype=float)
        v = -1e-3 * np.exp(-(r - 8) ** 2)
        return v, v, np.full_like(r, 7e-4)
    inp = HundsCaseAInput(R, *curves(R), analytic=curves, spin_orbit_limit=7e-4)
    V = build_asymptotic_matrix(inp)
    pair = AdiabaticPair(V)
    lo, hi = pair.curves(R)
    np.testing.assert_allclose(lo, V.voo(R), rtol=1e-15, atol=0)
    np.testing.assert_allclose(hi, V.vcc(R), rtol=1e-15, atol=0)
    np.testing.assert_allclose(pair.mixing_matrix(R), np.broadcast_to(np.eye(2), (len(R), 2, 2)), atol=0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_mixing_matrix_diagonalizes(voo, vcc, voc):
    phi = mixing_angle(voo, vcc, voc)
    c, s = math.cos(phi), math.sin(phi)
    M = np.array([[c, s], [-s, c]])
    D = M @ np.array([[voo, voc], [voc, vcc]]) @ M.T
    assert abs(D[0, 1]) <= 1e-12
    assert D[0, 0] <= D[1, 1] + 1e-12


def test_zero_amplitude_gives_constant_spin_orbit():
    p = SyntheticModelParams(coupling_amplitude=0.0)
    curves, _, a_inf = synthetic_curves(p)
    R = np.linspace(3.0, 60.0, 1000)
    np.testing.assert_allclose(curves(R)[2], 2.0 / 3.0 * p.delta_e_so, rtol=0, atol=1e-18)
    assert a_inf == pytest.approx(2.0 / 3.0 * RB_FINE_STRUCTURE_CM * CM_TO_HARTREE)


def test_synthetic_crossing_radius(V):
    assert 9.0 <= diabatic_crossing(V, 8.0, 12.0) <= 11.0


def test_synthetic_coupling_range_below_matching_radius(V):
    assert V.coupling_range < 13.0


def test_morse_model_is_decoupled():
    V = morse_model(4000 * CM_TO_HARTREE, 8.6, 0.5)
    R = np.linspace(3.0, 100.0, 1000)
    assert np.all(V.voc(R) == 0.0)
    assert V.E_open == 0.0
    assert (V.E_closed - V.E_open) * HARTREE_TO_CM == pytest.approx(RB_FINE_STRUCTURE_CM)


def test_morse_levels_formula():
    D, a, mu = 0.02, 0.5, 1000.0
    lv = morse_levels(D, a, mu)
    w = a * math.sqrt(2 * D / mu)
    assert lv[0] == pytest.approx(-D + w / 2 - w * w / (16 * D))
    assert np.all(np.diff(lv) > 0) and lv[-1] < 0


def test_input_validation():
    R, va, vb, aso = _samples()
    with pytest.raises(InputError):
        HundsCaseAInput(R[::-1], va, vb, aso)
    with pytest.raises(InputError):
        HundsCaseAInput(R[:3], va[:3], vb[:3], aso[:3])
    with pytest.raises(InputError):
        HundsCaseAInput(R, va, vb[:-1], aso)
    bad = va.copy()
    bad[3] = np.nan
    with pytest.raises(InputError):
        HundsCaseAInput(R, bad, vb, aso)
    with pytest.raises(InputError):
        SyntheticModelParams(coupling_amplitude=-1.0)
    with pytest.raises(InputError):
        build_asymptotic_matrix(HundsCaseAInput(R, va, vb, -aso))


def test_domain_error_below_first_sample(V):
    with pytest.raises(DomainError):
        V.evaluate(1.0)


def test_crossing_missing_raises(V):
    with pytest.raises(DomainError):
        diabatic_crossing(V, 20.0, 30.0)


def test_load_curves_roundtrip(tmp_path):
    R, va, vb, aso = _samples()
    path = tmp_path / "curves.dat"
    np.savetxt(path, np.column_stack([R, va, vb, aso]), header="R V_A V_b A_so", fmt="%.17g")
    inp = load_curves(path)
    V = build_asymptotic_matrix(inp)
    np.testing.assert_allclose(V.voc(R), math.sqrt(2 / 3) * (va - vb), rtol=0, atol=1e-14)


def test_load_curves_errors(tmp_path):
    p = tmp_path / "bad.dat"
    p.write_text("1 2 3\n")
    with pytest.raises(ParseError):
        load_curves(p)
    p.write_text("\n".join(f"{r} 0 0 1" for r in (1, 2, 2, 3, 4)))
    with pytest.raises(ParseError):
        load_curves(p)


def test_with_mass_keeps_curves(V):
    W = V.with_mass(2.0)
    assert W.reduced_mass == 2.0
    assert isinstance(W, ChannelPotentialMatrix)
    np.testing.assert_array_equal(W.evaluate(9.0), V.evaluate(9.0))
