"""Method drivers shared by the command line and the acceptance tests.

A ``Workbench`` resolves a RunConfig into a potential matrix and runs the
bound-state, resonance and phase computations of either method. Results
are returned in hartree; conversion to cm^-1 happens at output time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gmqdt, mfgh, qdt, resonance
from .config import ConfigError, RunConfig
from .potential import (ChannelPotentialMatrix, InputError, SyntheticModelParams, build_asymptotic_matrix,
                        default_model, load_curves, morse_model)
from .units import CM_TO_HARTREE, HARTREE_TO_CM


def build_potential(cfg: RunConfig) -> ChannelPotentialMatrix:
    mu = cfg.reduced_mass_me
    try:
        if cfg.potential == "synthetic":
            p = SyntheticModelParams(
                depth_A=cfg.depth_A_cm * CM_TO_HARTREE, r_eq_A=cfg.r_eq_A, stiffness_A=cfg.stiffness_A,
                depth_b=cfg.depth_b_cm * CM_TO_HARTREE, r_eq_b=cfg.r_eq_b, stiffness_b=cfg.stiffness_b,
                c3=cfg.c3, coupling_amplitude=cfg.coupling_amplitude, coupling_center=cfg.coupling_center,
                coupling_width=cfg.coupling_width, delta_e_so=cfg.delta_e_so_cm * CM_TO_HARTREE,
                reduced_mass=mu, join_radius=cfg.join_radius, join_width=cfg.join_width)
            return default_model(p)
        if cfg.potential == "morse":
            return morse_model(cfg.depth_A_cm * CM_TO_HARTREE, cfg.r_eq_A, cfg.stiffness_A,
                               cfg.delta_e_so_cm * CM_TO_HARTREE, mu)
        inp = load_curves(cfg.potential_path(), asymptote_energy=cfg.asymptote_energy)
        return build_asymptotic_matrix(inp, reduced_mass=mu)
    except InputError as exc:
        raise ConfigError(f"potential: {exc}") from None


def _window(V, window_cm):
    return (V.E_open + window_cm[0] * CM_TO_HARTREE, V.E_open + window_cm[1] * CM_TO_HARTREE)


@dataclass
class QDTResonances:
    resonances: list
    rotated: bool
    angles: qdt.RotationAngles | None = None
    Y_opt: np.ndarray | None = None


@dataclass
class PhaseScans:
    E: np.ndarray
    adiabatic: qdt.PhaseDecomposition
    optimized: qdt.PhaseDecomposition

    @property
    def max_deviation(self):
        if len(self.E) == 0:
            return 0.0
        return float(np.max(np.abs(self.adiabatic.sin2_delta_S - self.optimized.sin2_delta_S)))


@dataclass
class Workbench:
    cfg: RunConfig
    V: ChannelPotentialMatrix = None
    _model: gmqdt.GMQDTModel = field(default=None, repr=False)
    _providers: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.V is None:
            self.V = build_potential(self.cfg)

    # --- shared pieces ----------------------------------------------------------
    @property
    def model(self):
        if self._model is None:
            self._model = gmqdt.GMQDTModel(self.V, R0=self.cfg.r0)
        return self._model

    def provider(self, window):
        key = tuple(window)
        if key not in self._providers:
            self._providers[key] = self.model.provider(window, step=self.cfg.coarse_step_cm * CM_TO_HARTREE)
        return self._providers[key]

    def _gap(self):
        return 2.0 * gmqdt.THRESHOLD_GAP * self.cfg.coarse_step_cm * CM_TO_HARTREE

    @property
    def bound_window(self):
        """Configured bound window, clipped to the open well and kept off threshold."""
        lo, hi = _window(self.V, self.cfg.bound_window_cm)
        lo = max(lo, self.model.open_table.V_well + self._gap())
        return lo, min(hi, self.V.E_open - self._gap())

    @property
    def resonance_window(self):
        return self._above(self.cfg.resonance_window_cm)

    @property
    def phase_window(self):
        return self._above(self.cfg.phase_window_cm)

    def _above(self, window_cm):
        lo, hi = _window(self.V, window_cm)
        return max(lo, self.V.E_open + self._gap()), min(hi, self.V.E_closed - self._gap())

    # --- bound states -----------------------------------------------------------
    def bound_mfgh(self):
        """Real levels (hartree) and open weights below E_open."""
        lo, hi = self.cfg.bound_window_cm
        if not hi > lo:
            return [], []
        spec = mfgh.bound_levels(self.V, (lo, hi), L=self.cfg.bound_length,
                                 E_infty=self.cfg.bound_e_infty_cm * CM_TO_HARTREE,
                                 density_factor=self.cfg.bound_density)
        return list(spec.E), list(spec.open_weight)

    def bound_qdt(self):
        lo, hi = self.bound_window
        if not hi > lo:
            return []
        m = self.model
        if lo < m.closed_table.V_well:
            raise ConfigError("bound_window_cm reaches below the closed-channel well minimum "
                              f"({(m.closed_table.V_well - self.V.E_open) * HARTREE_TO_CM:.6g} cm^-1); "
                              "the quantum-defect method needs an allowed region in both channels")
        return qdt.bound_states(self.provider((lo, hi)), m.nu_c, (lo, hi), nu_o=m.nu_o)

    # --- resonances -------------------------------------------------------------
    def stabilization(self):
        cfg = self.cfg
        E_inf = None if math.isnan(cfg.stab_e_infty_cm) else cfg.stab_e_infty_cm * CM_TO_HARTREE
        opt = mfgh.OpticalPotentialParams(A_opt=cfg.a_opt, L_opt=cfg.l_opt, R_opt=cfg.stab_variants[0][1],
                                          N_opt=cfg.n_opt)
        spectra = resonance.variant_spectra(self.V, cfg.stab_variants, E_inf, cfg.stab_density, opt,
                                            max_points=cfg.max_points)
        lo, hi = self.resonance_window
        rep = resonance.stabilize(self.V, cfg.stab_variants, (lo, hi), tol=cfg.stab_tolerance, spectra=spectra)
        return rep, spectra

    def rotated_set(self, window):
        m = self.model
        return gmqdt.RotatedSet(self.provider(window), m.nu_c, m.xi_o)

    def resonances_qdt(self, rotated=None) -> QDTResonances:
        """Resonances from the quantum-defect formulas.

        Poles are always seeded from the optimized set, where the first-order
        positions are accurate; E0, shift and width are then reported in the
        requested set.
        """
        rotated = self.cfg.rotated if rotated is None else rotated
        lo, hi = self.resonance_window
        if not hi > lo:
            return QDTResonances([], rotated)
        m = self.model
        P = self.provider((lo, hi))
        rot = self.rotated_set((lo, hi))
        dom = (P.E[0], P.E[-1])
        opt = qdt.resonances(rot.Y, rot.nu_c, (lo, hi), Y_pole=P, nu_pole=m.nu_c, domain=dom)
        if rotated:
            return QDTResonances(opt, True, rot.angles, rot.Y_opt_mesh)
        seeds = [(r.E_r, r.gamma) for r in opt]
        adia = qdt.resonances(P, m.nu_c, (lo, hi), Y_pole=P, nu_pole=m.nu_c, seeds=seeds, domain=dom)
        return QDTResonances(adia, False)

    # --- phase scans ------------------------------------------------------------
    def phase_scans(self, step_cm=None) -> PhaseScans:
        lo, hi = self.phase_window
        step = (step_cm or self.cfg.fine_step_cm) * CM_TO_HARTREE
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1 if hi > lo else 0
        E = lo + step * np.arange(n)
        if n == 0:
            empty = qdt.PhaseDecomposition(*(np.zeros(0),) * 6)
            return PhaseScans(E, empty, empty)
        P = self.provider((lo, hi))
        tables = gmqdt.PhaseTables(self.model, (lo, hi), step=self.cfg.phase_step_cm * CM_TO_HARTREE)
        rot = gmqdt.RotatedSet(P, tables.nu_c, tables.xi_o)
        nu, xi = tables.nu_c(E), tables.xi_o(E)
        return PhaseScans(E, gmqdt.phase_scan(P, E, nu, xi), gmqdt.phase_scan(P, E, nu, xi, rot))

    def breit_wigner(self, resonances, rotated=True):
        """Breit-Wigner fits of delta_r around each resonance (list of fit or None)."""
        lo, hi = self.resonance_window
        P = self.provider((lo, hi))
        rot = self.rotated_set((lo, hi)) if rotated else None
        Er = np.array([r.E_r for r in resonances])
        out = []
        for r in resonances:
            others = np.abs(Er - r.E_r)
            others = others[others > 0]
            spacing = float(others.min()) if len(others) else math.inf
            E, s2 = gmqdt.resonance_profile(self.model, P, r, rot)
            try:
                out.append(resonance.fit_breit_wigner(E, s2, spacing))
            except resonance.FitError:
                out.append(None)
        return out


# --- comparison -------------------------------------------------------------------

def pair_nearest(a, b):
    """Injective pairing of two sorted energy lists by mutual nearest neighbours."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pairs, used_a, used_b = [], set(), set()
    if len(a) and len(b):
        for i, e in enumerate(a):
            j = int(np.argmin(np.abs(b - e)))
            if int(np.argmin(np.abs(a - b[j]))) == i:
                pairs.append((i, j))
                used_a.add(i)
                used_b.add(j)
    return (pairs, [i for i in range(len(a)) if i not in used_a], [j for j in range(len(b)) if j not in used_b])
