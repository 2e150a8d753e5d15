import math

import numpy as np
import pytest

from resonqdt import mfgh
from resonqdt.mfgh import ConfigurationError, OpticalPotentialParams
from resonqdt.potential import ChannelPotentialMatrix, DomainError, InputError, morse_levels, morse_model
from resonqdt.units import CM_TO_HARTREE, HARTREE_TO_CM


def _flat(E_open=0.0, mu=1000.0):
    a = 1e-3

    def curves(R):
        R = np.asarray(R, dtype=float)
        return np.full_like(R, E_open + a), np.full_like(R, E_open + a), np.full_like(R, a)
    return ChannelPotentialMatrix(curves, E_open, E_open + 1.5 * a, 0.0, mu, 0.0)


def test_flat_potential_gives_uniform_step():
    V = _flat()
    E_inf = 2e-3
    g = mfgh.build_mapped_grid(V, E_inf, 50.0, R_min=1.0, density_factor=1.0)
    s = math.pi / math.sqrt(2.0 * V.reduced_mass * E_inf)
    np.testing.assert_allclose(g.s, s, rtol=1e-12)
    # the point count rounds up, so the spacing is a little below s
    h = np.diff(g.R)
    assert np.ptp(h) < 1e-9 * s
    assert h[0] <= s and g.N == math.ceil(49.0 / s) + math.ceil(49.0 / s) % 2


def test_grid_is_even_and_inside():
    V = morse_model(4000 * CM_TO_HARTREE, 8.6, 0.5)
    g = mfgh.build_mapped_grid(V, 10 * CM_TO_HARTREE, 60.0, density_factor=1.5)
    assert g.N % 2 == 0
    assert g.R_min < g.R[0] < g.R[-1] < g.R_max == 60.0
    assert np.all(np.diff(g.R) > 0)


def test_grid_validation():
    V = morse_model(4000 * CM_TO_HARTREE, 8.6, 0.5)
    with pytest.raises(DomainError):
        mfgh.build_mapped_grid(V, -1.0, 60.0)
    with pytest.raises(InputError):
        mfgh.build_mapped_grid(V, 0.0, 60.0, density_factor=0.5)
    with pytest.raises(InputError):
        mfgh.build_mapped_grid(V, 0.0, 3.0, R_min=5.0)
    with pytest.raises(ConfigurationError):
        mfgh.build_mapped_grid(V, 0.0, 60.0, max_points=16)


def test_staggered_derivative_of_sine():
    # derivative of a band-limited function sampled at the cell centres
    N = 64
    D = mfgh.staggered_sinc_derivative(N)
    x = np.arange(N)
    f = np.sin(0.3 * x) * np.exp(-((x - 32) / 6.0) ** 2)
    xh = np.arange(-1, N) + 0.5
    exact = (0.3 * np.cos(0.3 * xh) - 2 * (xh - 32) / 36 * np.sin(0.3 * xh)) * np.exp(-((xh - 32) / 6.0) ** 2)
    np.testing.assert_allclose(D @ f, exact, atol=1e-8)


def test_kinetic_matrix_symmetric_positive():
    V = morse_model(4000 * CM_TO_HARTREE, 8.6, 0.5)
    g = mfgh.build_mapped_grid(V, 10 * CM_TO_HARTREE, 40.0)
    T = mfgh.kinetic_matrix(g)
    np.testing.assert_allclose(T, T.T, atol=0)
    assert np.linalg.eigvalsh(T).min() > 0


def test_harmonic_oracle_uniform_grid():
    mu, w = 1.0, 1.0
    g = mfgh.uniform_grid(-12.0, 12.0, 96, mu)
    E = np.linalg.eigvalsh(mfgh.kinetic_matrix(g) + np.diag(0.5 * mu * w * w * g.R ** 2))
    exact = w * (np.arange(12) + 0.5)
    np.testing.assert_allclose(E[:12], exact, rtol=1e-6)


def test_particle_in_box_ratios():
    # the walls act at a fixed effective length, so level ratios are n^2
    g = mfgh.uniform_grid(0.0, 10.0, 64, 1.0)
    E = np.linalg.eigvalsh(mfgh.kinetic_matrix(g))
    n = np.arange(1, 8)
    np.testing.assert_allclose(E[:7] / E[0], n ** 2, rtol=1e-4)


def test_morse_oracle_mapped():
    D, a = 4000 * CM_TO_HARTREE, 0.5
    V = morse_model(D, 8.6, a)
    spec = mfgh.bound_levels(V, (-4100.0, -1.0), L=60.0, E_infty=1 * CM_TO_HARTREE, coupling=False)
    E = spec.E[spec.open_weight > 0.5]
    exact = morse_levels(D, a, V.reduced_mass, -1 * CM_TO_HARTREE)
    assert len(E) == len(exact)
    assert np.max(np.abs(E - exact)) * HARTREE_TO_CM < 1e-6


def test_mapped_convergence_in_density():
    V = morse_model(4000 * CM_TO_HARTREE, 8.6, 0.5)
    kw = dict(L=60.0, E_infty=1 * CM_TO_HARTREE, coupling=False)
    a = mfgh.bound_levels(V, (-4100.0, -1.0), density_factor=1.5, **kw)
    b = mfgh.bound_levels(V, (-4100.0, -1.0), density_factor=3.0, **kw)
    assert len(a) == len(b)
    assert np.max(np.abs(a.E - b.E)) * HARTREE_TO_CM < 1e-4


def test_coupled_convergence_in_density(V):
    kw = dict(L=400.0, E_infty=1 * CM_TO_HARTREE)
    a = mfgh.bound_levels(V, (-81.0, -1.0), density_factor=1.5, **kw)
    b = mfgh.bound_levels(V, (-81.0, -1.0), density_factor=3.0, **kw)
    assert len(a) == len(b) > 50
    assert np.max(np.abs(a.E - b.E)) * HARTREE_TO_CM < 1e-4
    np.testing.assert_allclose(a.open_weight, b.open_weight, atol=1e-4)


def test_optical_potential_shape():
    p = OpticalPotentialParams(A_opt=4e-5, L_opt=40.0, R_opt=100.0)
    R = np.array([50.0, 100.0, 100.0 + 1e-6, 110.0, 1e9])
    v = mfgh.optical_potential_value(R, p)
    assert np.all(v.real == 0)
    assert v[0] == 0 and v[1] == 0 and abs(v[2]) < 1e-300
    assert 0 < -v[3].imag < -v[4].imag
    assert -v[4].imag == pytest.approx(p.A_opt * p.N_opt)


def test_uncoupled_real_hamiltonian_is_block_diagonal():
    V = morse_model(4000 * CM_TO_HARTREE, 8.6, 0.5)
    g = mfgh.build_mapped_grid(V, 10 * CM_TO_HARTREE, 40.0)
    H = mfgh.assemble(g, V, OpticalPotentialParams(A_opt=0.0, R_opt=30.0))
    N = g.N
    assert H.is_real and not np.iscomplexobj(H.matrix)
    assert np.all(H.matrix[:N, N:] == 0) and np.all(H.matrix[N:, :N] == 0)
    np.testing.assert_array_equal(H.matrix, H.matrix.T)


def test_zero_absorber_gives_real_spectrum(V):
    g = mfgh.build_mapped_grid(V, 237.6 * CM_TO_HARTREE, 80.0, density_factor=1.0)
    spec = mfgh.diagonalize(mfgh.assemble(g, V, OpticalPotentialParams(A_opt=0.0, R_opt=40.0)))
    assert np.max(np.abs(spec.half_width)) <= 1e-12


def test_absorber_gives_nonnegative_widths(V):
    g = mfgh.build_mapped_grid(V, 237.6 * CM_TO_HARTREE, 80.0, density_factor=1.0)
    spec = mfgh.diagonalize(mfgh.assemble(g, V, OpticalPotentialParams(R_opt=40.0)))
    assert np.min(spec.half_width) > -1e-12
    np.testing.assert_allclose(spec.window(-1, 1).open_weight, np.clip(spec.window(-1, 1).open_weight, 0, 1))


def test_absorber_onset_beyond_grid_rejected(V):
    g = mfgh.build_mapped_grid(V, 10 * CM_TO_HARTREE, 40.0)
    with pytest.raises(ConfigurationError):
        mfgh.assemble(g, V, OpticalPotentialParams(R_opt=50.0))


def test_envelope_is_smooth_and_bounded(V):
    R = np.linspace(V.R_min, 60.0, 20001)
    env = mfgh.envelope_potential(V, R)
    assert np.all(env <= np.minimum(V.voo(R), V.vcc(R)) + 1e-15)
    d2 = np.diff(env, 2) / (R[1] - R[0]) ** 2
    assert np.max(np.abs(d2)) < 1.0


def test_grid_size_golden_and_monotone(V):
    split = V.E_closed - V.E_open
    sizes = [mfgh.build_mapped_grid(V, f * split, 160.0).N for f in (0.25, 0.5, 1.0)]
    assert sizes[-1] == 768
    assert sizes == sorted(sizes) and len(set(sizes)) == 3


def test_bound_levels_ignore_absorber_onset(V):
    # levels whose outer turning point lies well inside every R_opt
    g = mfgh.build_mapped_grid(V, V.E_closed - V.E_open, 160.0)
    lo, hi = V.E_open - 400 * CM_TO_HARTREE, V.E_open - 81 * CM_TO_HARTREE
    ref = mfgh.diagonalize(mfgh.assemble(g, V, None)).window(lo, hi)
    for R_opt in (40.0, 80.0, 120.0):
        s = mfgh.diagonalize(mfgh.assemble(g, V, OpticalPotentialParams(R_opt=R_opt))).window(lo, hi)
        assert len(s) == len(ref)
        assert np.max(np.abs(s.E - ref.E)) * HARTREE_TO_CM < 1e-6
        assert np.max(np.abs(s.half_width)) * HARTREE_TO_CM < 1e-6
