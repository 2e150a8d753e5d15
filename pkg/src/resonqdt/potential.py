"""Two-channel spin-orbit coupled potential matrices.

The Hund's case (a) curves V_A (singlet), V_b (triplet) and the spin-orbit
function A_so are rotated into the asymptotic basis where the atomic
spin-orbit interaction is diagonal::

    V_oo = V_A/3 + 2 V_b/3 - A_so
    V_cc = 2 V_A/3 + V_b/3 + A_so/2
    V_oc = V_co = sqrt(2/3) (V_A - V_b)

The open channel (o) correlates to the lower fine-structure asymptote and the
closed channel (c) to the upper one, split by 3/2 A_so(inf).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erfc

from .units import CM_TO_HARTREE, RB85_REDUCED_MASS, RB_FINE_STRUCTURE_CM

COUPLING_TOLERANCE = 1e-12
TAIL_FIT_POINTS = 5


class InputError(ValueError):
    """Malformed or inconsistent potential input."""


class ParseError(InputError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DomainError(ValueError):
    """Evaluation outside the region where the potential is defined."""


CurveFunction = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class HundsCaseAInput:
    """Sampled Hund's case (a) curves in atomic units.

    ``analytic`` is an optional exact evaluator ``R -> (V_A, V_b, A_so)``
    used in place of spline interpolation (synthetic models carry one).
    ``spin_orbit_limit`` is A_so(R -> inf) when known exactly.
    """

    R_samples: np.ndarray
    V_A: np.ndarray
    V_b: np.ndarray
    A_so: np.ndarray
    asymptote_energy: float = 0.0
    analytic: Optional[CurveFunction] = field(default=None, compare=False, repr=False)
    spin_orbit_limit: Optional[float] = None
    c3: Optional[float] = None

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=float) for a in (self.R_samples, self.V_A, self.V_b, self.A_so)]
        n = len(arrays[0])
        if any(a.ndim != 1 or len(a) != n for a in arrays):
            raise InputError("R, V_A, V_b and A_so must be 1-d sequences of equal length")
        if n < 4:
            raise InputError(f"need at least 4 samples, got {n}")
        if np.any(np.diff(arrays[0]) <= 0):
            raise InputError("R samples must be strictly increasing")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise InputError("non-finite sample values")
        for name, a in zip(("R_samples", "V_A", "V_b", "A_so"), arrays):
            object.__setattr__(self, name, a)


def _fit_inverse_cube(R, V, asymptote):
    """Least-squares C in V = asymptote - C/R^3."""
    x = R ** -3.0
    return -float(np.dot(V - asymptote, x) / np.dot(x, x))


def _fit_const_inverse_cube(R, V):
    """Least-squares (a, c) in V = a + c/R^3."""
    A = np.column_stack([np.ones_like(R), R ** -3.0])
    (a, c), *_ = np.linalg.lstsq(A, V, rcond=None)
    return float(a), float(c)


class _SplineCurves:
    """Natural cubic splines inside the table, fitted -C/R^3 tails outside."""

    def __init__(self, inp: HundsCaseAInput):
        R = inp.R_samples
        self.R_first = R[0]
        self.R_last = R[-1]
        self.asym = inp.asymptote_energy
        self._splines = [CubicSpline(R, v, bc_type="natural") for v in (inp.V_A, inp.V_b, inp.A_so)]
        tail = slice(-TAIL_FIT_POINTS, None)
        self.c3_A = _fit_inverse_cube(R[tail], inp.V_A[tail], self.asym)
        self.c3_b = _fit_inverse_cube(R[tail], inp.V_b[tail], self.asym)
        if inp.spin_orbit_limit is not None:
            self.a_inf = float(inp.spin_orbit_limit)
            x = R[tail] ** -3.0
            self.a_c3 = float(np.dot(inp.A_so[tail] - self.a_inf, x) / np.dot(x, x))
        else:
            self.a_inf, self.a_c3 = _fit_const_inverse_cube(R[tail], inp.A_so[tail])

    def __call__(self, R):
        R = np.asarray(R, dtype=float)
        inside = R <= self.R_last
        out = []
        x3 = np.where(inside, 1.0, R) ** -3.0
        tails = (self.asym - self.c3_A * x3, self.asym - self.c3_b * x3, self.a_inf + self.a_c3 * x3)
        for spl, t in zip(self._splines, tails):
            out.append(np.where(inside, spl(np.minimum(R, self.R_last)), t))
        return tuple(out)


@dataclass(frozen=True)
class ChannelPotentialMatrix:
    """Evaluator for the 2x2 diabatic matrix [[V_oo, V_oc], [V_co, V_cc]].

    ``long_range_coefficients`` holds C in V_ii ~ E_i - C/R^power for the
    open and closed channel; beyond ``tail_start`` those tails are exact.
    """

    curves: CurveFunction = field(repr=False)
    E_open: float
    E_closed: float
    R_min: float
    reduced_mass: float = RB85_REDUCED_MASS
    coupling_range: float = math.inf
    long_range_powers: tuple = (3, 3)
    long_range_coefficients: tuple = (0.0, 0.0)
    coupling_tolerance: float = COUPLING_TOLERANCE
    tail_start: float = math.inf

    def _check(self, R):
        R = np.asarray(R, dtype=float)
        if np.any(R < self.R_min - 1e-12):
            raise DomainError(f"R = {float(np.min(R))} below first sample {self.R_min}")
        return R

    def elements(self, R):
        """Return (V_oo, V_cc, V_oc) at R."""
        R = self._check(R)
        va, vb, aso = self.curves(R)
        voo = va / 3.0 + 2.0 * vb / 3.0 - aso
        vcc = 2.0 * va / 3.0 + vb / 3.0 + 0.5 * aso
        voc = math.sqrt(2.0 / 3.0) * (va - vb)
        return voo, vcc, voc

    def voo(self, R):
        return self.elements(R)[0]

    def vcc(self, R):
        return self.elements(R)[1]

    def voc(self, R):
        return self.elements(R)[2]

    def evaluate(self, R):
        """2x2 matrix at R; shape (..., 2, 2) for array input."""
        voo, vcc, voc = self.elements(R)
        m = np.empty(np.shape(voo) + (2, 2))
        m[..., 0, 0] = voo
        m[..., 1, 1] = vcc
        m[..., 0, 1] = voc
        m[..., 1, 0] = voc
        return m

    def v_inf(self, R):
        voo, vcc, _ = self.elements(R)
        return np.minimum(voo, vcc)

    def with_mass(self, reduced_mass):
        return ChannelPotentialMatrix(
            self.curves, self.E_open, self.E_closed, self.R_min, reduced_mass,
            self.coupling_range, self.long_range_powers, self.long_range_coefficients,
            self.coupling_tolerance, self.tail_start)


def _coupling_range(curves, R_first, tol, R_far):
    R = np.linspace(R_first, R_far, 200001)
    va, vb, _ = curves(R)
    big = np.nonzero(np.abs(math.sqrt(2.0 / 3.0) * (va - vb)) >= tol)[0]
    if len(big) == 0:
        return float(R_first)
    if big[-1] == len(R) - 1:
        return math.inf
    return float(R[big[-1] + 1])


def build_asymptotic_matrix(inp: HundsCaseAInput, reduced_mass=RB85_REDUCED_MASS,
                            coupling_tolerance=COUPLING_TOLERANCE) -> ChannelPotentialMatrix:
    """Rotate Hund's case (a) curves into the asymptotic (diabatic) basis."""
    if inp.analytic is not None:
        curves = inp.analytic
        a_inf = inp.spin_orbit_limit
        if a_inf is None:
            a_inf = float(curves(np.array([1e8]))[2][0])
        c3 = inp.c3 or 0.0
        coeffs = (c3, c3)
    else:
        spl = _SplineCurves(inp)
        curves = spl
        a_inf = spl.a_inf
        coeffs = (spl.c3_A / 3 + 2 * spl.c3_b / 3 + spl.a_c3,
                  2 * spl.c3_A / 3 + spl.c3_b / 3 - 0.5 * spl.a_c3)
    if a_inf <= 0:
        raise InputError("asymptotic spin-orbit constant must be positive")
    e_open = inp.asymptote_energy - a_inf
    e_closed = inp.asymptote_energy + 0.5 * a_inf
    r_far = max(4.0 * inp.R_samples[-1], 100.0)
    crange = _coupling_range(curves, inp.R_samples[0], coupling_tolerance, r_far)
    return ChannelPotentialMatrix(curves, e_open, e_closed, float(inp.R_samples[0]),
                                  float(reduced_mass), crange, (3, 3), coeffs, coupling_tolerance,
                                  float(inp.R_samples[-1]))


# --- adiabatic representation -------------------------------------------------

def mixing_angle(voo, vcc, voc):
    """Angle phi with lower eigenvector (cos phi, sin phi).

    Continuous in R as long as V_oc keeps its sign; phi -> 0 where the
    coupling vanishes and V_oo < V_cc.
    """
    return 0.5 * np.arctan2(-2.0 * voc, vcc - voo)


@dataclass(frozen=True)
class AdiabaticPair:
    V: ChannelPotentialMatrix

    def curves(self, R):
        """Return (V_minus, V_plus) at R."""
        voo, vcc, voc = self.V.elements(R)
        mean = 0.5 * (voo + vcc)
        half = np.hypot(0.5 * (vcc - voo), voc)
        return mean - half, mean + half

    def lower(self, R):
        return self.curves(R)[0]

    def upper(self, R):
        return self.curves(R)[1]

    def angle(self, R):
        voo, vcc, voc = self.V.elements(R)
        phi = mixing_angle(voo, vcc, voc)
        if np.ndim(phi) and len(phi) > 1:
            if np.all(np.diff(np.asarray(R)) > 0):
                phi = 0.5 * np.unwrap(2.0 * phi)
        return phi

    def mixing_matrix(self, R):
        """M(R) with rows the (lower, upper) eigenvectors: M V M^T = diag."""
        phi = self.angle(R)
        c, s = np.cos(phi), np.sin(phi)
        m = np.empty(np.shape(phi) + (2, 2))
        m[..., 0, 0] = c
        m[..., 0, 1] = s
        m[..., 1, 0] = -s
        m[..., 1, 1] = c
        return m


def adiabatize(V: ChannelPotentialMatrix) -> AdiabaticPair:
    return AdiabaticPair(V)


def diabatic_crossing(V: ChannelPotentialMatrix, lo, hi):
    """Radius where V_oo = V_cc inside [lo, hi] (bisection)."""
    from scipy.optimize import brentq
    f = lambda r: float(V.voo(r) - V.vcc(r))
    if f(lo) * f(hi) > 0:
        raise DomainError(f"no diabatic crossing in [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=1e-13)


# --- synthetic Rb2-like model -------------------------------------------------

@dataclass(frozen=True)
class SyntheticModelParams:
    """Analytic stand-in for the (A, b) curves, atomic units.

    Each curve is a Morse well switched smoothly onto a shared -C3/R^3 tail;
    because the switch is common to both curves, V_A - V_b (and hence the
    diabatic coupling) dies off like erfc beyond ``join_radius``.
    """

    depth_A: float = 4000.0 * CM_TO_HARTREE
    r_eq_A: float = 8.6
    stiffness_A: float = 0.50
    depth_b: float = 3000.0 * CM_TO_HARTREE
    r_eq_b: float = 8.6
    stiffness_b: float = 0.50
    c3: float = 10.0
    coupling_amplitude: float = -0.9
    coupling_center: float = 10.0
    coupling_width: float = 1.0
    delta_e_so: float = RB_FINE_STRUCTURE_CM * CM_TO_HARTREE
    reduced_mass: float = RB85_REDUCED_MASS
    join_radius: float = 10.0
    join_width: float = 0.45
    r_first: float = 3.0
    r_last: float = 60.0

    def __post_init__(self):
        positive = ("depth_A", "r_eq_A", "stiffness_A", "depth_b", "r_eq_b", "stiffness_b",
                    "coupling_width", "delta_e_so", "reduced_mass", "join_radius", "join_width",
                    "r_first")
        for name in positive:
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive, got {getattr(self, name)}")
        if self.c3 < 0:
            raise InputError("c3 must be non-negative")
        if self.coupling_amplitude <= -1:
            raise InputError("coupling_amplitude must exceed -1 (A_so stays positive)")
        if self.r_last <= self.r_first:
            raise InputError("r_last must exceed r_first")


def _morse(R, depth, r_eq, a):
    e = np.exp(-a * (R - r_eq))
    return depth * ((1.0 - e) ** 2 - 1.0)


def synthetic_curves(p: SyntheticModelParams):
    """Exact evaluator R -> (V_A, V_b, A_so) with the asymptote at A_so(inf).

    The asymptote is placed so that E_open = 0.
    """
    a_inf = 2.0 * p.delta_e_so / 3.0
    asym = a_inf

    def curves(R):
        R = np.asarray(R, dtype=float)
        s = 0.5 * erfc((R - p.join_radius) / p.join_width)
        tail = -p.c3 / R ** 3
        va = asym + s * _morse(R, p.depth_A, p.r_eq_A, p.stiffness_A) + (1.0 - s) * tail
        vb = asym + s * _morse(R, p.depth_b, p.r_eq_b, p.stiffness_b) + (1.0 - s) * tail
        g = np.exp(-(((R - p.coupling_center) / p.coupling_width) ** 2))
        aso = a_inf * (1.0 + p.coupling_amplitude * g)
        return va, vb, aso

    return curves, asym, a_inf


def synthetic_model(params: SyntheticModelParams | None = None, n_samples=2000) -> HundsCaseAInput:
    p = params or SyntheticModelParams()
    curves, asym, a_inf = synthetic_curves(p)
    R = np.linspace(p.r_first, p.r_last, n_samples)
    va, vb, aso = curves(R)
    return HundsCaseAInput(R, va, vb, aso, asym, analytic=curves, spin_orbit_limit=a_inf, c3=p.c3)


def default_model(params: SyntheticModelParams | None = None) -> ChannelPotentialMatrix:
    p = params or SyntheticModelParams()
    return build_asymptotic_matrix(synthetic_model(p), reduced_mass=p.reduced_mass)


def morse_model(depth, r_eq, stiffness, delta_e_so=RB_FINE_STRUCTURE_CM * CM_TO_HARTREE,
                reduced_mass=RB85_REDUCED_MASS, r_first=3.0, r_last=60.0) -> ChannelPotentialMatrix:
    """Decoupled oracle: V_A = V_b = one Morse curve, A_so constant.

    V_oc vanishes identically; both channels carry the closed-form Morse
    ladder, offset by their asymptotes (E_open = 0).
    """
    for name, v in (("depth", depth), ("r_eq", r_eq), ("stiffness", stiffness), ("delta_e_so", delta_e_so)):
        if not v > 0:
            raise InputError(f"{name} must be positive, got {v}")
    a_inf = 2.0 * delta_e_so / 3.0

    def curves(R):
        R = np.asarray(R, dtype=float)
        v = a_inf + _morse(R, depth, r_eq, stiffness)
        return v, v.copy(), np.full_like(R, a_inf)

    R = np.linspace(r_first, r_last, 2000)
    inp = HundsCaseAInput(R, *curves(R), a_inf, analytic=curves, spin_orbit_limit=a_inf, c3=0.0)
    return build_asymptotic_matrix(inp, reduced_mass=reduced_mass)


def morse_levels(depth, stiffness, reduced_mass, E_max=0.0):
    """Closed-form Morse levels -D + w (n + 1/2) - [w (n + 1/2)]^2 / (4 D) below E_max."""
    w = stiffness * math.sqrt(2.0 * depth / reduced_mass)
    n = np.arange(int(2.0 * depth / w - 0.5) + 1)
    x = w * (n + 0.5)
    lv = -depth + x - x * x / (4.0 * depth)
    return lv[lv < E_max]


# --- file ingestion -----------------------------------------------------------

def load_curves(path, asymptote_energy=0.0, spin_orbit_limit=None) -> HundsCaseAInput:
    """Read ``R V_A V_b A_so`` rows (bohr, hartree); '#' starts a comment."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 columns, got {len(parts)}", lineno)
            try:
                rows.append([float(x) for x in parts])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if len(rows) > 1 and rows[-1][0] <= rows[-2][0]:
                raise ParseError("R column must be strictly increasing", lineno)
    if len(rows) < 4:
        raise ParseError(f"need at least 4 data rows, found {len(rows)}")
    data = np.array(rows)
    return HundsCaseAInput(data[:, 0], data[:, 1], data[:, 2], data[:, 3], asymptote_energy,
                           spin_orbit_limit=spin_orbit_limit)


def evaluate(V: ChannelPotentialMatrix, R):
    return V.evaluate(R)
