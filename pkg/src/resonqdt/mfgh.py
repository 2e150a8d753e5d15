"""Mapped Fourier grid Hamiltonian with an optical potential.

The radial grid is uniform in an envelope coordinate x and follows the local
de Broglie step s(R) = pi / sqrt(2 mu [E_open - V_env(R) + E_infty]) in R,
with V_env a smooth lower envelope of the potential matrix.
The kinetic operator on the mapped grid is built in the symmetric form

    T = J^-1/2 D^T J^-1 D J^-1/2 / (2 mu)

with D the derivative of the sinc basis in x sampled at the half points
between grid nodes, J = dR/dx at the nodes and J^-1 taken at the half
points. The Hamiltonian stays real symmetric without the optical potential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .potential import ChannelPotentialMatrix, DomainError, InputError
from .units import CM_TO_HARTREE, HARTREE_TO_CM

N_OPT_DEFAULT = 13.22
MAX_POINTS_DEFAULT = 4096
ENVELOPE_BLEND = 0.5


class ConfigurationError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class MappedGrid:
    R: np.ndarray
    s: np.ndarray
    jacobian: np.ndarray
    half_jacobian: np.ndarray
    R_min: float
    R_max: float
    E_infty: float
    density_factor: float
    reduced_mass: float

    @property
    def N(self):
        return len(self.R)

    @property
    def L(self):
        return self.R_max - self.R_min


def _lower_curve(V, R):
    voo, vcc, voc = V.elements(R)
    return 0.5 * (voo + vcc) - np.hypot(0.5 * (vcc - voo), voc)


def _well_bottom(V):
    R = np.linspace(V.R_min, max(V.R_min + 30.0, 40.0), 30001)
    v = _lower_curve(V, R)
    i = int(np.argmin(v))
    return float(R[i]), float(v[i])


def envelope_potential(V: ChannelPotentialMatrix, R, bottom=None, width=ENVELOPE_BLEND):
    """Smooth lower envelope of the potential matrix used by the mapping.

    The lower adiabatic curve (a smooth minimum of V_oo and V_cc) outside
    the well bottom, blended onto its minimum value inside it with a tanh
    switch of ``width`` bohr. A kink in the envelope would make the mapping
    non-smooth and degrade the spectral convergence of the grid to a power
    law; inside the wall the well-bottom momentum still resolves the decay.
    """
    R_b, v_b = bottom or _well_bottom(V)
    R = np.asarray(R, dtype=float)
    v = _lower_curve(V, R)
    sw = 0.5 * (1.0 + np.tanh((R - R_b) / width))
    return v_b + sw * (v - v_b)


def _kinetic_argument(V, R, E_infty, bottom=None):
    arg = V.E_open - envelope_potential(V, R, bottom) + E_infty
    if np.any(arg <= 0):
        raise DomainError("local kinetic energy E_open - V_env + E_infty must stay positive")
    return arg


def local_step(V: ChannelPotentialMatrix, R, E_infty, bottom=None):
    """s(R) = pi / sqrt(2 mu [E_open - V_env(R) + E_infty]) in bohr."""
    return math.pi / np.sqrt(2.0 * V.reduced_mass * _kinetic_argument(V, R, E_infty, bottom))


def inner_turning_point(V: ChannelPotentialMatrix, energy, R_hi=None):
    """Innermost R where V_inf crosses ``energy`` going outward."""
    R = np.linspace(V.R_min, R_hi or max(V.R_min + 30.0, 40.0), 20000)
    below = np.nonzero(V.v_inf(R) < energy)[0]
    if len(below) == 0:
        raise DomainError("no classically allowed region at this energy")
    i = below[0]
    if i == 0:
        return float(R[0])
    f = lambda r: float(V.v_inf(r) - energy)
    return brentq(f, R[i - 1], R[i], xtol=1e-12)


def default_R_min(V, E_infty):
    rt = inner_turning_point(V, V.E_open + E_infty)
    return max(rt - 2.0, 4.0, V.R_min)


def build_mapped_grid(V: ChannelPotentialMatrix, E_infty, L, R_min=None, density_factor=1.0,
                      max_points=MAX_POINTS_DEFAULT) -> MappedGrid:
    """Grid from R_min to R_max = L (bohr) with an even point count.

    ``L`` is the outer end of the grid, following the convention that a
    grid "of length 80" with the optical potential starting at 40 ends at
    80 bohr.
    """
    if E_infty < 0:
        raise DomainError("E_infty must be non-negative")
    if density_factor < 1:
        raise InputError("density_factor must be >= 1")
    if R_min is None:
        R_min = default_R_min(V, E_infty)
    if L <= R_min:
        raise InputError(f"grid end {L} must exceed R_min {R_min}")
    mu = V.reduced_mass
    n_aux = 200001
    Ra = np.linspace(R_min, L, n_aux)
    bottom = _well_bottom(V)
    density = density_factor / local_step(V, Ra, E_infty, bottom)
    u = cumulative_simpson(density, x=Ra, initial=0.0)
    N = int(math.ceil(u[-1]))
    N += N % 2
    N = max(N, 4)
    if N > max_points:
        raise ConfigurationError(f"grid needs {N} points, above the cap of {max_points}")
    du = u[-1] / N
    inverse = CubicSpline(u, Ra)
    R = inverse((np.arange(N) + 0.5) * du)
    s = local_step(V, R, E_infty, bottom)
    jac = du * s / density_factor
    # half points sit on the cell edges; the two outer ones clip to the ends
    R_half = inverse(np.clip(np.arange(N + 1) * du, 0.0, u[-1]))
    jac_half = du * local_step(V, R_half, E_infty, bottom) / density_factor
    return MappedGrid(R, s, jac, jac_half, float(R_min), float(L), float(E_infty), float(density_factor), mu)


def uniform_grid(R_min, R_max, N, reduced_mass) -> MappedGrid:
    h = (R_max - R_min) / N
    R = R_min + (np.arange(N) + 0.5) * h
    ones = np.ones(N)
    return MappedGrid(R, h * ones, h * ones, h * np.ones(N + 1), R_min, R_max, math.inf, 1.0, reduced_mass)


def staggered_sinc_derivative(N):
    """d/dx of the N sinc functions sampled at the N+1 half points -1/2 .. N-1/2."""
    h = np.arange(-1, N)[:, None]
    m = h - np.arange(N)[None, :]
    t = m + 0.5
    return -((-1.0) ** np.abs(m)) / (math.pi * t * t)


def kinetic_matrix(grid: MappedGrid):
    """Symmetric mapped kinetic matrix; J^-1 is sampled at the half points."""
    D = staggered_sinc_derivative(grid.N)
    A = D / np.sqrt(grid.jacobian)[None, :]
    T = A.T @ (A / grid.half_jacobian[:, None])
    return (T + T.T) / (4.0 * grid.reduced_mass)


# --- optical potential ----------------------------------------------------------

@dataclass(frozen=True)
class OpticalPotentialParams:
    A_opt: float = 4e-5
    L_opt: float = 40.0
    R_opt: float = 120.0
    N_opt: float = N_OPT_DEFAULT

    def __post_init__(self):
        if self.A_opt < 0 or self.L_opt <= 0:
            raise InputError("A_opt must be >= 0 and L_opt > 0")


def optical_potential_value(R, p: OpticalPotentialParams):
    """-i A N exp(-2 L_opt / (R - R_opt)) beyond R_opt, zero inside."""
    R = np.asarray(R, dtype=float)
    x = R - p.R_opt
    pos = x > 0
    with np.errstate(divide="ignore", over="ignore"):
        val = np.where(pos, np.exp(-2.0 * p.L_opt / np.where(pos, x, 1.0)), 0.0)
    return -1j * p.A_opt * p.N_opt * val


# --- Hamiltonian ----------------------------------------------------------------

@dataclass(frozen=True)
class CoupledHamiltonian:
    """Dense 2N x 2N matrix, open-channel block first."""

    matrix: np.ndarray = field(repr=False)
    grid: MappedGrid
    n_channel: int
    R_opt: float = math.inf

    @property
    def is_real(self):
        return not np.iscomplexobj(self.matrix) or not np.any(self.matrix.imag)


def assemble(grid: MappedGrid, V: ChannelPotentialMatrix, p: OpticalPotentialParams | None = None,
             coupling=True) -> CoupledHamiltonian:
    N = grid.N
    T = kinetic_matrix(grid)
    voo, vcc, voc = V.elements(grid.R)
    absorbing = p is not None and p.A_opt > 0
    H = np.zeros((2 * N, 2 * N), dtype=complex if absorbing else float)
    H[:N, :N] = T
    H[N:, N:] = T
    idx = np.arange(N)
    H[idx, idx] += voo
    H[N + idx, N + idx] += vcc
    if coupling:
        H[idx, N + idx] = voc
        H[N + idx, idx] = voc
    if absorbing:
        if p.R_opt >= grid.R_max:
            raise ConfigurationError(f"optical potential onset {p.R_opt} beyond grid end {grid.R_max}")
        H[idx, idx] += optical_potential_value(grid.R, p)
        return CoupledHamiltonian(H, grid, N, float(p.R_opt))
    return CoupledHamiltonian(H, grid, N)


@dataclass(frozen=True)
class ComplexSpectrum:
    """Eigenvalues E - i half_width with eigenvector weights.

    ``open_weight`` is the open-channel share of |v|^2 and ``inner_weight``
    the share at R < R_opt (inside the absorber onset).
    """

    E: np.ndarray
    half_width: np.ndarray
    open_weight: np.ndarray
    inner_weight: np.ndarray = None

    def __post_init__(self):
        if self.inner_weight is None:
            object.__setattr__(self, "inner_weight", np.ones(len(self.E)))

    def __len__(self):
        return len(self.E)

    def window(self, lo, hi):
        m = (self.E > lo) & (self.E < hi)
        return ComplexSpectrum(self.E[m], self.half_width[m], self.open_weight[m], self.inner_weight[m])


def diagonalize(H: CoupledHamiltonian, vectors=True) -> ComplexSpectrum:
    """All eigenpairs; real symmetric matrices go through eigh."""
    N = H.n_channel
    try:
        if H.is_real:
            m = H.matrix.real if np.iscomplexobj(H.matrix) else H.matrix
            if vectors:
                w, v = scipy.linalg.eigh(m)
            else:
                w, v = scipy.linalg.eigh(m, eigvals_only=True), None
        else:
            if vectors:
                w, v = scipy.linalg.eig(H.matrix)
            else:
                w, v = scipy.linalg.eigvals(H.matrix), None
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"eigensolver failed for {2 * N}x{2 * N} matrix: {exc}") from exc
    w = np.asarray(w, dtype=complex)
    order = np.argsort(w.real, kind="stable")
    w = w[order]
    if v is not None:
        v = v[:, order]
        p = np.abs(v) ** 2
        total = p.sum(axis=0)
        weight = p[:N].sum(axis=0) / total
        inside = np.tile(H.grid.R < H.R_opt, 2)
        inner = p[inside].sum(axis=0) / total
    else:
        weight = np.full(len(w), np.nan)
        inner = np.full(len(w), np.nan)
    return ComplexSpectrum(w.real.copy(), -w.imag.copy(), weight, inner)


def bound_levels(V: ChannelPotentialMatrix, window_cm, L=1500.0, E_infty=0.0, density_factor=2.0,
                 R_min=None, coupling=True):
    """Real levels (hartree) and open weights inside a window given in cm^-1 relative to E_open."""
    grid = build_mapped_grid(V, E_infty, L, R_min=R_min, density_factor=density_factor)
    spec = diagonalize(assemble(grid, V, None, coupling=coupling))
    lo = V.E_open + window_cm[0] * CM_TO_HARTREE
    hi = V.E_open + window_cm[1] * CM_TO_HARTREE
    return spec.window(lo, hi)


def spectrum_rows(spec: ComplexSpectrum, E_open):
    for e, g, w in zip(spec.E, spec.half_width, spec.open_weight):
        yield ((e - E_open) * HARTREE_TO_CM, g * HARTREE_TO_CM, w)
