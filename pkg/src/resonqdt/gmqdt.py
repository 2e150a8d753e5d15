"""GMQDT pipeline: Y(E) on a coarse mesh, reference phases, rotated sets.

``GMQDTModel`` ties a potential matrix to its Milne reference channels and
the Numerov propagator. ``YProvider`` interpolates Y on a coarse energy
mesh with cubic splines; ``RotatedSet`` applies the two-step optimization
pointwise, choosing angle branches from the unwrapped mesh values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import milne, qdt
from .potential import AdiabaticPair, ChannelPotentialMatrix, InputError
from .propagation import (R0_DEFAULT, PreconditionError, default_R_start, logderivative_scan)
from .units import CM_TO_HARTREE

COARSE_STEP_CM = 0.5
PHASE_STEP_CM = 0.05
FINE_STEP_CM = 0.005
R0_SHIFT = 0.05
# closest approach of a Y mesh point to the open threshold, in mesh steps
THRESHOLD_GAP = 0.01


class GMQDTModel:
    """Reference channels, propagation and Y extraction for one potential."""

    def __init__(self, V: ChannelPotentialMatrix, R0=R0_DEFAULT, R_start=None):
        if not V.coupling_range < R0:
            raise PreconditionError(f"R0 = {R0} inside the coupling range {V.coupling_range}")
        self.V = V
        self.R0 = float(R0)
        self.open_table, self.closed_table = milne.adiabatic_tables(V)
        self.M0 = AdiabaticPair(V).mixing_matrix(self.R0)
        self._R_start = R_start

    # reference phases -------------------------------------------------------------
    def nu_c(self, E):
        return milne.accumulated_phase(self.closed_table, E)

    def nu_o(self, E):
        return milne.accumulated_phase(self.open_table, E)

    def xi_o(self, E):
        return milne.asymptotic_shift(self.open_table, E)

    def refs(self, E, R0=None):
        R0 = self.R0 if R0 is None else R0
        return (milne.reference_at(self.open_table, E, R0), milne.reference_at(self.closed_table, E, R0))

    # Y matrix ----------------------------------------------------------------------
    def R_start(self, E_max):
        return self._R_start or default_R_start(self.V, E_max, self.R0)

    def y_direct(self, energies, R0=None, max_attempts=5):
        """Y for each energy by propagation to R0 and Milne references there.

        A singular [L g - g'] shifts R0 outward by a small step, at most
        ``max_attempts`` times.
        """
        energies = np.atleast_1d(np.asarray(energies, dtype=float))
        R0 = self.R0 if R0 is None else float(R0)
        R_s = self.R_start(float(np.max(energies)))
        out = np.empty((len(energies), 2, 2))
        pending = np.arange(len(energies))
        for attempt in range(max_attempts):
            r = R0 + attempt * R0_SHIFT
            M = AdiabaticPair(self.V).mixing_matrix(r)
            L = logderivative_scan(self.V, energies[pending], R_s, r)
            failed = []
            for idx, Ld in zip(pending, L):
                ro = milne.reference_at(self.open_table, energies[idx], r)
                rc = milne.reference_at(self.closed_table, energies[idx], r)
                La = M @ Ld @ M.T
                try:
                    out[idx] = _solve_y(La, ro, rc)
                except np.linalg.LinAlgError:
                    failed.append(idx)
            if not failed:
                return out
            pending = np.array(failed)
        raise qdt.QDTError(f"[L g - g'] singular after {max_attempts} radius shifts")

    def provider(self, window, step=COARSE_STEP_CM * CM_TO_HARTREE, margin=4):
        """Spline provider covering ``window`` (hartree) plus ``margin`` mesh steps."""
        lo, hi = window
        n = max(int(math.ceil((hi - lo) / step)), 1)
        mesh = lo + step * np.arange(-margin, n + margin + 1)
        mesh = mesh[mesh > self.open_table.V_well + 1e-9]
        # the open reference changes character at threshold; keep the mesh on one side
        E_open = self.V.E_open
        gap = THRESHOLD_GAP * step
        if hi <= E_open:
            mesh = mesh[mesh < E_open - gap]
        elif lo >= E_open:
            mesh = mesh[mesh > E_open + gap]
        if len(mesh) < 4:
            raise InputError("energy window leaves fewer than 4 mesh points for Y")
        return YProvider(mesh, self.y_direct(mesh))


def _solve_y(L, ro, rc):
    f = np.diag([ro.f, rc.f])
    g = np.diag([ro.g, rc.g])
    fp = np.diag([ro.fp, rc.fp])
    gp = np.diag([ro.gp, rc.gp])
    A = L @ g - gp
    if abs(np.linalg.det(A)) < 1e-12 * np.linalg.norm(A) ** 2:
        raise np.linalg.LinAlgError("singular [L g - g']")
    return np.linalg.solve(A, L @ f - fp)


@dataclass
class YProvider:
    """Cubic-spline interpolation of Y(E) from a coarse mesh."""

    E: np.ndarray
    Y: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._spl = CubicSpline(self.E, self.Y.reshape(len(self.E), 4), axis=0)

    def __call__(self, E):
        E = np.asarray(E, dtype=float)
        if np.any(E < self.E[0] - 1e-15) or np.any(E > self.E[-1] + 1e-15):
            raise InputError("energy outside the Y mesh")
        return self._spl(E).reshape(E.shape + (2, 2))


class RotatedSet:
    """Optimized reference set evaluated pointwise.

    The angles follow from Y(E) analytically; their branches are fixed by
    the unwrapped values on the provider mesh, so every evaluation lands on
    the same continuous sheet.
    """

    def __init__(self, provider: YProvider, nu_c, xi_o=None):
        self.base = provider
        self.nu_c_base = nu_c
        self.xi_o_base = xi_o
        self.angles, self.Y_opt_mesh, _ = qdt.optimize_rotation(provider.E, provider.Y)
        self._tc = CubicSpline(provider.E, self.angles.theta_c)
        self._to = CubicSpline(provider.E, self.angles.theta_o)

    def theta(self, E):
        """(theta_o, theta_c, Y_opt) at E."""
        Y = self.base(E)
        K = qdt.k_cc_siegert(Y)
        tc = qdt.align_branch(qdt.theta_c_principal(K), self._tc(E), 0.5 * math.pi)
        to = qdt.align_branch(qdt.open_angle(Y, tc), self._to(E), math.pi)
        return to, tc, qdt.rotate_Y(Y, to, tc)

    def Y(self, E):
        return self.theta(E)[2]

    def nu_c(self, E):
        return self.nu_c_base(E) + self.theta(E)[1]

    def xi_o(self, E):
        return self.xi_o_base(E) + self.theta(E)[0]


class PhaseTables:
    """nu_c(E) and xi_o(E) from Milne runs on a mesh, spline-interpolated.

    Used for dense scans where a Milne run per sample would dominate.
    """

    def __init__(self, model: GMQDTModel, window, step=PHASE_STEP_CM * CM_TO_HARTREE, margin=3):
        lo, hi = window
        n = max(int(math.ceil((hi - lo) / step)), 1)
        mesh = lo + step * np.arange(-margin, n + margin + 1)
        mesh = mesh[mesh > model.V.E_open + THRESHOLD_GAP * step]
        self.E = mesh
        self._nu = CubicSpline(mesh, [model.nu_c(e) for e in mesh])
        self._xi = CubicSpline(mesh, qdt.unwrap([model.xi_o(e) for e in mesh], math.pi))

    def nu_c(self, E):
        return self._nu(E)

    def xi_o(self, E):
        return self._xi(E)


def phase_scan(provider: YProvider, energies, nu_c, xi_o, rotated: RotatedSet | None = None):
    """PhaseDecomposition on ``energies`` given sampled nu_c and xi_o arrays.

    With ``rotated`` the optimized set is used: Y_opt and the phases shifted
    by the rotation angles.
    """
    E = np.asarray(energies, dtype=float)
    nu_c = np.asarray(nu_c, dtype=float)
    xi_o = np.asarray(xi_o, dtype=float)
    if rotated is None:
        return qdt.phase_decomposition(E, provider(E), nu_c, xi_o)
    to, tc, Y = rotated.theta(E)
    return qdt.phase_decomposition(E, Y, nu_c + tc, xi_o + to)


def resonance_profile(model: GMQDTModel, provider: YProvider, res: qdt.Resonance, rotated=None,
                      n=41, span=1.0):
    """(E, sin^2 delta_r) on E_r +- span * Gamma with direct Milne phases."""
    gam = res.gamma_pole if np.isfinite(res.gamma_pole) else res.gamma
    E = res.E_r + span * gam * np.linspace(-1.0, 1.0, n)
    nu = np.array([model.nu_c(e) for e in E])
    xi = np.array([model.xi_o(e) for e in E])
    return E, phase_scan(provider, E, nu, xi, rotated).sin2_delta_r
