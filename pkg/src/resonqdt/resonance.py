"""Resonances from complex spectra and resonant phase profiles.

``stabilize`` keeps the eigenvalues of the optical-potential Hamiltonian
whose widths stay put when the grid (and with it the discretized
continuum) changes. ``time_delay`` sums Lorentzians over the complex
spectrum and ``fit_breit_wigner`` fits sin^2 delta_r profiles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import mfgh
from .potential import ChannelPotentialMatrix, InputError
from .units import CM_TO_HARTREE

CONVERGENCE_TOLERANCE = 0.05
WIDTH_FLOOR = 1e-8 * CM_TO_HARTREE
ISOLATION_RATIO = 0.2
MIN_SAMPLES = 7
# below this share of |v|^2 inside R_opt a state lives in the absorber
# (pseudo-continuum and absorber-localized states)
INNER_WEIGHT_MIN = 0.05
DEFAULT_VARIANTS = ((80.0, 40.0), (160.0, 120.0), (180.0, 140.0))


class FitError(ArithmeticError):
    pass


@dataclass(frozen=True)
class StabilizedResonance:
    E_r: float
    half_width: float
    spread: float
    converged: bool
    open_weight: float = math.nan

    @property
    def gamma(self):
        return 2.0 * self.half_width


@dataclass
class StabilizationReport:
    candidates: list = field(default_factory=list)
    diagnostic: str = ""

    @property
    def converged(self):
        return [c for c in self.candidates if c.converged]

    def __len__(self):
        return len(self.candidates)


@dataclass(frozen=True)
class BreitWignerFit:
    E_r: float
    gamma: float
    residual: float
    isolated: bool = True


# --- stabilization ----------------------------------------------------------------

def variant_spectra(V: ChannelPotentialMatrix, grid_variants=DEFAULT_VARIANTS, E_infty=None,
                    density_factor=1.5, optical=None, max_points=mfgh.MAX_POINTS_DEFAULT):
    """Complex spectra between the thresholds for each (L, R_opt) variant."""
    if E_infty is None:
        E_infty = V.E_closed - V.E_open
    base = optical or mfgh.OpticalPotentialParams()
    out = []
    for L, R_opt in grid_variants:
        grid = mfgh.build_mapped_grid(V, E_infty, L, density_factor=density_factor, max_points=max_points)
        p = mfgh.OpticalPotentialParams(base.A_opt, base.L_opt, R_opt, base.N_opt)
        spec = mfgh.diagonalize(mfgh.assemble(grid, V, p))
        out.append(spec.window(V.E_open, V.E_closed))
    return out


def match_spectra(spectra, tol=CONVERGENCE_TOLERANCE, floor=WIDTH_FLOOR):
    """Pair eigenvalues across spectra; the first spectrum is the reference.

    For each reference eigenvalue the partner in every other spectrum is the
    nearest E_k within half the local level spacing, ties going to the
    smaller width difference. Unpaired or bound-like (width below ``floor``)
    states are dropped, and so are states living in the absorber (inner
    weight below ``INNER_WEIGHT_MIN``): their widths repeat across variants
    that share the absorber length without being resonances.
    """
    if len(spectra) < 3:
        raise InputError("stabilization needs at least 3 grid variants")
    ref = spectra[0]
    out = []
    for k, (E, hw, w, inner) in enumerate(zip(ref.E, ref.half_width, ref.open_weight, ref.inner_weight)):
        if hw < floor / 2.0 or inner < INNER_WEIGHT_MIN:
            continue
        gaps = np.abs(np.diff(ref.E))
        lo = gaps[k - 1] if k > 0 else math.inf
        hi = gaps[k] if k < len(gaps) else math.inf
        half_spacing = 0.5 * min(lo, hi)
        widths = [hw]
        energies = [E]
        for other in spectra[1:]:
            d = np.abs(other.E - E)
            if len(d) == 0 or d.min() >= half_spacing:
                break
            near = np.nonzero(d <= d.min() * (1.0 + 1e-9))[0]
            j = near[np.argmin(np.abs(other.half_width[near] - hw))]
            widths.append(other.half_width[j])
            energies.append(other.E[j])
        else:
            widths = np.array(widths)
            if np.all(widths >= floor / 2.0):
                spread = float((widths.max() - widths.min()) / widths.mean())
                out.append(StabilizedResonance(float(np.mean(energies)), float(np.mean(widths)), spread,
                                               spread <= tol, float(w)))
    return out


def stabilize(V: ChannelPotentialMatrix, grid_variants=DEFAULT_VARIANTS, window=None, E_infty=None,
              density_factor=1.5, optical=None, tol=CONVERGENCE_TOLERANCE, spectra=None) -> StabilizationReport:
    """Stabilized resonances of the optical-potential Hamiltonian.

    ``window`` (hartree) restricts the reported candidates; by default the
    whole inter-threshold range is kept. Candidates whose widths spread by
    more than ``tol`` between the variants are reported unconverged.
    """
    if len(grid_variants) < 3:
        raise InputError("stabilization needs at least 3 grid variants")
    if spectra is None:
        spectra = variant_spectra(V, grid_variants, E_infty, density_factor, optical)
    cands = match_spectra(spectra, tol)
    if window is not None:
        cands = [c for c in cands if window[0] <= c.E_r <= window[1]]
    diag = "" if any(c.converged for c in cands) else "no candidate converged across the grid variants"
    return StabilizationReport(cands, diag)


# --- time delay -------------------------------------------------------------------

def time_delay(spectrum, E, threshold=None):
    """Sum of (G/2) / ((E - E_k)^2 + (G/2)^2) over eigenvalues above ``threshold``.

    Inverse hartree (atomic time units). ``E`` may be an array.
    """
    Ek = np.asarray(spectrum.E, dtype=float)
    hw = np.asarray(spectrum.half_width, dtype=float)
    if threshold is not None:
        keep = Ek > threshold
        Ek, hw = Ek[keep], hw[keep]
    E = np.asarray(E, dtype=float)
    d = E[..., None] - Ek
    return np.sum(hw / (d * d + hw * hw), axis=-1)


def time_delay_peak(spectrum, E_r, gamma, threshold=None, wing=2.0, n=201):
    """Height of the time-delay peak near E_r above the smooth background.

    The discretized continuum adds a slowly varying background; it is
    estimated from the mean at E_r +- ``wing`` * gamma, less the resonance's
    own Lorentzian tail there. For an isolated resonance the result is 2/gamma.
    """
    E = E_r + gamma * np.linspace(-0.25, 0.25, n)
    peak = float(np.max(time_delay(spectrum, E, threshold)))
    wings = time_delay(spectrum, E_r + wing * gamma * np.array([-1.0, 1.0]), threshold)
    background = float(np.mean(wings)) - (2.0 / gamma) / (1.0 + 4.0 * wing * wing)
    return peak - background


# --- Breit-Wigner -----------------------------------------------------------------

def lorentzian(E, E_r, gamma):
    h = 0.5 * gamma
    return h * h / ((E - E_r) ** 2 + h * h)


def fit_breit_wigner(E, sin2, spacing=math.inf) -> BreitWignerFit:
    """Least-squares fit of sin^2 delta_r = (G/2)^2 / ((E - E_r)^2 + (G/2)^2).

    ``spacing`` is the local resonance spacing for the isolation flag.
    The fit runs in scaled variables centred on the sampled maximum.
    """
    E = np.asarray(E, dtype=float)
    y = np.asarray(sin2, dtype=float)
    if len(E) < MIN_SAMPLES:
        raise FitError(f"need at least {MIN_SAMPLES} samples, got {len(E)}")
    order = np.argsort(E)
    E, y = E[order], y[order]
    i = int(np.argmax(y))
    if i == 0 or i == len(y) - 1:
        raise FitError("profile has no interior maximum")
    above = E[y >= 0.5 * y[i]]
    g0 = max(above[-1] - above[0], E[i + 1] - E[i - 1])
    E_c, scale = E[i], g0

    def resid(p):
        return lorentzian((E - E_c) / scale, p[0], p[1]) - y

    sol = least_squares(resid, [0.0, 1.0], x_scale=[0.1, 0.1], xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        bounds=([-np.inf, 1e-12], [np.inf, np.inf]))
    E_r = E_c + sol.x[0] * scale
    gamma = abs(sol.x[1]) * scale
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    return BreitWignerFit(float(E_r), float(gamma), rms, bool(gamma <= ISOLATION_RATIO * spacing))
