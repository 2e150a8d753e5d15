"""Milne phase-amplitude reference functions for single adiabatic channels.

With q(R) = 2 mu (E - V(R)) each channel is solved in amplitude-phase form

    alpha'' + q alpha = alpha^-3,   beta' = alpha^-2,

and the reference pair is

    f = c alpha sin(beta - beta_in),   g = -c alpha cos(beta - beta_in),

with c^2 = 2 mu / pi, so that f g' - g f' = 2 mu / pi (energy normalization).
The phase origin beta_in is the converged phase deep in the inner forbidden
region, which makes f the solution regular at the inner wall.

Closed channels start at the well minimum with a second-order WKB envelope and
are integrated outward and inward until beta stops growing; the accumulated
phase is nu = beta_out - beta_in. Open channels start far out on the WKB
envelope and run inward; the shift xi is the phase of f relative to sin(kR)
once the analytic tail of the phase integral beyond the start is added.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.interpolate import BPoly, CubicSpline

from .potential import AdiabaticPair, ChannelPotentialMatrix, DomainError, InputError

TABLE_STEP = 0.002
RTOL_DEFAULT = 1e-10
ATOL_DEFAULT = 1e-12
PHASE_CONVERGENCE = 1e-14
TAIL_SMALLNESS = 3e-3
MAX_STEPS = 400000

_KIND_CUBIC = 0
_KIND_POWER = 1


class RangeError(RuntimeError):
    """Integration did not converge inside the allowed span."""


class SingularityError(ArithmeticError):
    """cos(nu) vanishes where the normalization factor is requested."""


# --- tabulated channel potential -------------------------------------------------

@dataclass(frozen=True)
class ChannelTable:
    """Uniform cubic-spline table of a channel potential with an outer tail.

    Beyond ``R_tab`` the potential is ``asymptote - c_tail / R**power`` when
    ``kind`` is the power tail, otherwise the last cubic piece is continued.
    """

    r0: float
    h: float
    coef: np.ndarray = field(repr=False)
    R_tab: float
    asymptote: float
    c_tail: float
    power: int
    kind: int
    reduced_mass: float
    R_well: float
    V_well: float

    @classmethod
    def from_function(cls, func, R_lo, R_tab, reduced_mass, asymptote=math.inf, c_tail=0.0,
                      power=3, step=TABLE_STEP):
        n = max(int(math.ceil((R_tab - R_lo) / step)), 8)
        R = np.linspace(R_lo, R_tab, n + 1)
        v = np.asarray(func(R), dtype=float)
        spl = CubicSpline(R, v)
        coef = np.ascontiguousarray(spl.c[::-1].T)
        kind = _KIND_POWER if math.isfinite(asymptote) else _KIND_CUBIC
        i = int(np.argmin(v))
        return cls(float(R_lo), float(R[1] - R[0]), coef, float(R_tab), float(asymptote),
                   float(c_tail), int(power), kind, float(reduced_mass), float(R[i]), float(v[i]))

    def _args(self):
        return (self.r0, self.h, self.coef, self.R_tab, self.asymptote, self.c_tail,
                float(self.power), self.kind)

    def __call__(self, R):
        R = np.atleast_1d(np.asarray(R, dtype=float))
        out = np.array([_pot(r, *self._args())[0] for r in R])
        return out

    def derivatives(self, R):
        return _pot(float(R), *self._args())

    def is_open(self, E):
        return self.kind == _KIND_POWER and E > self.asymptote


def adiabatic_tables(V: ChannelPotentialMatrix, R_tab=None, step=TABLE_STEP):
    """(open, closed) channel tables built on the lower/upper adiabatic curves."""
    if R_tab is None:
        R_tab = V.tail_start if math.isfinite(V.tail_start) else max(60.0, 5.0 * V.coupling_range)
    if not V.coupling_range < R_tab:
        raise InputError(f"coupling range {V.coupling_range} reaches the analytic tail at {R_tab}")
    pair = AdiabaticPair(V)
    c_o, c_c = V.long_range_coefficients
    p_o, p_c = V.long_range_powers
    lower = ChannelTable.from_function(pair.lower, V.R_min, R_tab, V.reduced_mass, V.E_open, c_o, p_o, step)
    upper = ChannelTable.from_function(pair.upper, V.R_min, R_tab, V.reduced_mass, V.E_closed, c_c, p_c, step)
    return lower, upper


@njit(cache=True)
def _pot(R, r0, h, coef, R_tab, asym, ctail, power, kind):
    if R >= R_tab and kind == 1:
        x = R ** (-power)
        return asym - ctail * x, power * ctail * x / R, -power * (power + 1.0) * ctail * x / (R * R)
    n = coef.shape[0]
    i = int((R - r0) / h)
    if i < 0:
        i = 0
    elif i > n - 1:
        i = n - 1
    t = R - (r0 + i * h)
    c0 = coef[i, 0]
    c1 = coef[i, 1]
    c2 = coef[i, 2]
    c3 = coef[i, 3]
    v = c0 + t * (c1 + t * (c2 + t * c3))
    d1 = c1 + t * (2.0 * c2 + 3.0 * c3 * t)
    d2 = 2.0 * c2 + 6.0 * c3 * t
    return v, d1, d2


@njit(cache=True)
def _wkb_start(R, E, mu, r0, h, coef, R_tab, asym, ctail, power, kind):
    v, d1, d2 = _pot(R, r0, h, coef, R_tab, asym, ctail, power, kind)
    q = 2.0 * mu * (E - v)
    if q <= 0.0:
        return -1.0, 0.0
    q1 = -2.0 * mu * d1
    q2 = -2.0 * mu * d2
    w0 = math.sqrt(q)
    w0p = q1 / (2.0 * w0)
    w0pp = q2 / (2.0 * w0) - q1 * q1 / (4.0 * w0 * w0 * w0)
    w2 = q + 0.75 * (w0p / w0) ** 2 - 0.5 * w0pp / w0
    if w2 <= 0.0:
        return -1.0, 0.0
    w = math.sqrt(w2)
    a = 1.0 / math.sqrt(w)
    ap = -0.5 * w0p * a / w
    return a, ap


@njit(cache=True)
def _rhs(R, a, ap, E, mu, r0, h, coef, R_tab, asym, ctail, power, kind):
    v = _pot(R, r0, h, coef, R_tab, asym, ctail, power, kind)[0]
    q = 2.0 * mu * (E - v)
    ia2 = 1.0 / (a * a)
    return ap, ia2 * ia2 * a - q * a, ia2, q


@njit(cache=True)
def _milne_run(r_start, a0, ap0, direction, r_hard, r_guard, E, mu,
               r0, h, coef, R_tab, asym, ctail, power, kind,
               rtol, atol, conv_tol, out_r, store, max_steps):
    """Adaptive Dormand-Prince integration of (alpha, alpha', beta).

    Returns (status, r, alpha, alpha', beta, out (len(out_r), 3), traj, n).
    status 0: phase converged past ``r_guard``; 1: reached ``r_hard``;
    2: step budget exhausted; 3: step size underflow.
    """
    n_out = out_r.shape[0]
    out = np.full((n_out, 3), np.nan)
    cap = max_steps + 1 if store else 1
    traj = np.empty((cap, 4))
    r = r_start
    y0 = a0
    y1 = ap0
    y2 = 0.0
    k1_0, k1_1, k1_2, q = _rhs(r, y0, y1, E, mu, r0, h, coef, R_tab, asym, ctail, power, kind)
    n = 0
    if store:
        traj[0, 0] = r
        traj[0, 1] = y0
        traj[0, 2] = y1
        traj[0, 3] = y2
        n = 1
    j = 0
    while j < n_out and direction * (out_r[j] - r) <= 0.0:
        if out_r[j] == r:
            out[j, 0] = y0
            out[j, 1] = y1
            out[j, 2] = y2
        j += 1
    step = 0.01
    status = 2
    for _ in range(max_steps):
        land = -1
        hh = step
        lim = abs(r_hard - r)
        if j < n_out:
            dj = abs(out_r[j] - r)
            if dj <= hh:
                hh = dj
                land = 0
        if lim <= hh:
            hh = lim
            land = 1
        if hh < 1e-13:
            if land == 1:
                status = 1
                break
            status = 3
            break
        s = direction * hh
        k2_0, k2_1, k2_2, _q = _rhs(r + s * 0.2, y0 + s * 0.2 * k1_0, y1 + s * 0.2 * k1_1,
                                   E, mu, r0, h, coef, R_tab, asym, ctail, power, kind)
        k3_0, k3_1, k3_2, _q = _rhs(r + s * 0.3, y0 + s * (3.0 / 40 * k1_0 + 9.0 / 40 * k2_0),
                                   y1 + s * (3.0 / 40 * k1_1 + 9.0 / 40 * k2_1),
                                   E, mu, r0, h, coef, R_tab, asym, ctail, power, kind)
        k4_0, k4_1, k4_2, _q = _rhs(r + s * 0.8,
                                   y0 + s * (44.0 / 45 * k1_0 - 56.0 / 15 * k2_0 + 32.0 / 9 * k3_0),
                                   y1 + s * (44.0 / 45 * k1_1 - 56.0 / 15 * k2_1 + 32.0 / 9 * k3_1),
                                   E, mu, r0, h, coef, R_tab, asym, ctail, power, kind)
        k5_0, k5_1, k5_2, _q = _rhs(r + s * 8.0 / 9,
                                   y0 + s * (19372.0 / 6561 * k1_0 - 25360.0 / 2187 * k2_0
                                             + 64448.0 / 6561 * k3_0 - 212.0 / 729 * k4_0),
                                   y1 + s * (19372.0 / 6561 * k1_1 - 25360.0 / 2187 * k2_1
                                             + 64448.0 / 6561 * k3_1 - 212.0 / 729 * k4_1),
                                   E, mu, r0, h, coef, R_tab, asym, ctail, power, kind)
        k6_0, k6_1, k6_2, _q = _rhs(r + s,
                                   y0 + s * (9017.0 / 3168 * k1_0 - 355.0 / 33 * k2_0 + 46732.0 / 5247 * k3_0
                                             + 49.0 / 176 * k4_0 - 5103.0 / 18656 * k5_0),
                                   y1 + s * (9017.0 / 3168 * k1_1 - 355.0 / 33 * k2_1 + 46732.0 / 5247 * k3_1
                                             + 49.0 / 176 * k4_1 - 5103.0 / 18656 * k5_1),
                                   E, mu, r0, h, coef, R_tab, asym, ctail, power, kind)
        n0 = y0 + s * (35.0 / 384 * k1_0 + 500.0 / 1113 * k3_0 + 125.0 / 192 * k4_0
                       - 2187.0 / 6784 * k5_0 + 11.0 / 84 * k6_0)
        n1 = y1 + s * (35.0 / 384 * k1_1 + 500.0 / 1113 * k3_1 + 125.0 / 192 * k4_1
                       - 2187.0 / 6784 * k5_1 + 11.0 / 84 * k6_1)
        n2 = y2 + s * (35.0 / 384 * k1_2 + 500.0 / 1113 * k3_2 + 125.0 / 192 * k4_2
                       - 2187.0 / 6784 * k5_2 + 11.0 / 84 * k6_2)
        k7_0, k7_1, k7_2, q7 = _rhs(r + s, n0, n1, E, mu, r0, h, coef, R_tab, asym, ctail, power, kind)
        e0 = s * (71.0 / 57600 * k1_0 - 71.0 / 16695 * k3_0 + 71.0 / 1920 * k4_0
                  - 17253.0 / 339200 * k5_0 + 22.0 / 525 * k6_0 - 1.0 / 40 * k7_0)
        e1 = s * (71.0 / 57600 * k1_1 - 71.0 / 16695 * k3_1 + 71.0 / 1920 * k4_1
                  - 17253.0 / 339200 * k5_1 + 22.0 / 525 * k6_1 - 1.0 / 40 * k7_1)
        e2 = s * (71.0 / 57600 * k1_2 - 71.0 / 16695 * k3_2 + 71.0 / 1920 * k4_2
                  - 17253.0 / 339200 * k5_2 + 22.0 / 525 * k6_2 - 1.0 / 40 * k7_2)
        sc0 = atol + rtol * max(abs(y0), abs(n0))
        sc1 = atol + rtol * max(abs(y1), abs(n1))
        sc2 = atol + rtol * max(abs(y2), abs(n2))
        err = math.sqrt(((e0 / sc0) ** 2 + (e1 / sc1) ** 2 + (e2 / sc2) ** 2) / 3.0)
        if not (err <= 1.0) or n0 <= 0.0:
            if err != err or n0 <= 0.0:
                fac = 0.2
            else:
                fac = max(0.2, 0.9 * err ** -0.2)
            step = hh * fac
            continue
        if land == 0:
            r = out_r[j]
        elif land == 1:
            r = r_hard
        else:
            r = r + s
        y0 = n0
        y1 = n1
        y2 = n2
        k1_0 = k7_0
        k1_1 = k7_1
        k1_2 = k7_2
        q = q7
        if store and n < cap:
            traj[n, 0] = r
            traj[n, 1] = y0
            traj[n, 2] = y1
            traj[n, 3] = y2
            n += 1
        while j < n_out and direction * (out_r[j] - r) <= 0.0:
            out[j, 0] = y0
            out[j, 1] = y1
            out[j, 2] = y2
            j += 1
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        if land == 0:
            step = max(step, hh * fac)
        else:
            step = hh * fac
        if land == 1:
            status = 1
            break
        if j >= n_out and direction * (r - r_guard) > 0.0 and q < 0.0:
            kappa = math.sqrt(-q)
            if 1.0 / (y0 * y0 * kappa) < conv_tol * max(1.0, abs(y2)):
                status = 0
                break
    return status, r, y0, y1, y2, out, traj, n


@njit(cache=True)
def _turning_points(E, r0, h, coef, R_tab, asym, ctail, power, kind):
    """Innermost and outermost radius where V < E (table nodes, plus the tail)."""
    n = coef.shape[0]
    lo = -1.0
    hi = -1.0
    for i in range(n):
        if coef[i, 0] < E:
            lo = r0 + i * h
            break
    for i in range(n - 1, -1, -1):
        if coef[i, 0] < E:
            hi = r0 + (i + 1) * h
            break
    if kind == 1 and hi >= R_tab - 2 * h:
        if E >= asym:
            hi = math.inf
        else:
            hi = max(hi, (ctail / (asym - E)) ** (1.0 / power)) if ctail > 0 else hi
    return lo, hi


# --- solutions --------------------------------------------------------------------

@dataclass
class MilneSolution:
    """Amplitude/phase trajectory of one channel at one energy.

    ``R`` ascends; ``beta`` is already measured from the inner phase origin,
    so f = c alpha sin(beta) is regular at the inner wall.
    """

    table: ChannelTable = field(repr=False)
    E: float
    R: np.ndarray = field(repr=False)
    alpha_nodes: np.ndarray = field(repr=False)
    alpha_prime_nodes: np.ndarray = field(repr=False)
    beta_nodes: np.ndarray = field(repr=False)
    phase: float
    is_open: bool
    R_far: float = math.nan
    _interp: tuple = field(default=None, repr=False)

    @property
    def W(self):
        return 2.0 * self.table.reduced_mass / math.pi

    @property
    def c(self):
        return math.sqrt(self.W)

    def _poly(self):
        if self._interp is None:
            a, ap, b = self.alpha_nodes, self.alpha_prime_nodes, self.beta_nodes
            q = 2.0 * self.table.reduced_mass * (self.E - self.table(self.R))
            app = a ** -3 - q * a
            bp = a ** -2
            bpp = -2.0 * ap * a ** -3
            pa = BPoly.from_derivatives(self.R, np.column_stack([a, ap, app])[:, :, None])
            pb = BPoly.from_derivatives(self.R, np.column_stack([b, bp, bpp])[:, :, None])
            self._interp = (pa, pb)
        return self._interp

    def _domain(self, R):
        R = np.asarray(R, dtype=float)
        if np.any(R < self.R[0]) or np.any(R > self.R[-1]):
            raise DomainError(f"R outside the integrated span [{self.R[0]}, {self.R[-1]}]")
        return R

    def alpha(self, R):
        return self._poly()[0](self._domain(R))[..., 0]

    def alpha_prime(self, R):
        return self._poly()[0].derivative()(self._domain(R))[..., 0]

    def beta(self, R):
        return self._poly()[1](self._domain(R))[..., 0]

    def beta_prime(self, R):
        return self._poly()[1].derivative()(self._domain(R))[..., 0]

    def wronskian(self, R):
        """f g' - g f' = c^2 alpha^2 beta' from the interpolated trajectory."""
        return self.W * self.alpha(R) ** 2 * self.beta_prime(R)

    def f(self, R):
        return self.c * self.alpha(R) * np.sin(self.beta(R))

    def g(self, R):
        return -self.c * self.alpha(R) * np.cos(self.beta(R))


@dataclass(frozen=True)
class ReferenceChannel:
    """Reference values of one channel at the matching radius R0."""

    E: float
    R0: float
    f: float
    g: float
    fp: float
    gp: float
    nu: float = math.nan
    xi: float = math.nan
    N2: float = math.nan
    is_open: bool = False

    @property
    def wronskian(self):
        return self.f * self.gp - self.g * self.fp


def _fg(c, a, ap, b):
    s, co = math.sin(b), math.cos(b)
    f = c * a * s
    g = -c * a * co
    fp = c * (ap * s + co / a)
    gp = c * (-ap * co + s / a)
    return f, g, fp, gp


def tail_phase(k, b, R, power=3):
    """Integral of (sqrt(k^2 + b/R^p) - k) from R to infinity, plus the WKB correction."""
    if b == 0.0:
        return 0.0
    p = float(power)
    t = (b / (2.0 * k * (p - 1.0) * R ** (p - 1.0))
         - b * b / (8.0 * k ** 3 * (2.0 * p - 1.0) * R ** (2.0 * p - 1.0))
         + b ** 3 / (16.0 * k ** 5 * (3.0 * p - 1.0) * R ** (3.0 * p - 1.0)))
    return t - b * p / (8.0 * k ** 3 * R ** (p + 1.0))


def far_radius(table: ChannelTable, E, R_min_far=None):
    """Start radius for inward open-channel runs: the tail series is converged there."""
    k2 = 2.0 * table.reduced_mass * (E - table.asymptote)
    b = 2.0 * table.reduced_mass * table.c_tail
    R = max(table.R_tab, R_min_far or 0.0, 20.0 * 2.0 * math.pi / math.sqrt(k2) if k2 > 0 else 0.0)
    if b > 0:
        R = max(R, (b / (k2 * TAIL_SMALLNESS)) ** (1.0 / table.power))
    return R


class _Runner:
    """Thin wrapper binding one table to the numba kernels."""

    def __init__(self, table: ChannelTable, rtol=RTOL_DEFAULT, atol=ATOL_DEFAULT):
        self.t = table
        self.args = table._args()
        self.mu = table.reduced_mass
        self.rtol = rtol
        self.atol = atol

    def run(self, r_start, a0, ap0, direction, r_hard, r_guard, E, out_r, store):
        out_r = np.ascontiguousarray(out_r, dtype=float)
        res = _milne_run(float(r_start), a0, ap0, float(direction), float(r_hard), float(r_guard),
                         float(E), self.mu, *self.args, self.rtol, self.atol, PHASE_CONVERGENCE,
                         out_r, store, MAX_STEPS)
        status = res[0]
        if status >= 2:
            raise RangeError(f"Milne integration stalled at R = {res[1]:.6g} (status {status})")
        return res


def _integrate(table: ChannelTable, E, R_span=None, out_r=(), store=False, rtol=RTOL_DEFAULT,
               R_far=None):
    """Core driver. Returns (phase, is_open, out (len, 3) at out_r, trajectory or None, R_far)."""
    if E <= table.V_well:
        raise DomainError("energy below the channel minimum: no classically allowed region")
    run = _Runner(table, rtol)
    lo_span = table.r0 if R_span is None else max(float(R_span[0]), table.r0)
    hi_span = 1e7 if R_span is None else float(R_span[1])
    r_in, r_out = _turning_points(E, *table._args())
    out_r = np.asarray(out_r, dtype=float)
    order = np.argsort(out_r)
    out_sorted = out_r[order]
    result = np.full((len(out_r), 3), np.nan)
    if table.is_open(E):
        k = math.sqrt(2.0 * table.reduced_mass * (E - table.asymptote))
        Rf = R_far or far_radius(table, E)
        if R_span is not None and R_span[1] < Rf:
            raise RangeError(f"span end {R_span[1]} short of the asymptotic region {Rf:.1f}")
        a0, ap0 = _wkb_start(Rf, E, table.reduced_mass, *table._args())
        inward = out_sorted[::-1]
        st, r, a, ap, b_in, out, traj, n = run.run(Rf, a0, ap0, -1.0, lo_span, r_in, E, inward, store)
        outs = out[::-1].copy()
        b = 2.0 * table.reduced_mass * table.c_tail
        phase = -b_in - k * Rf + tail_phase(k, b, Rf, table.power)
        outs[:, 2] -= b_in
        result[order] = outs
        tr = None
        if store:
            tr = traj[:n][::-1].copy()
            tr[:, 3] -= b_in
        return phase, True, result, tr, Rf
    Rm = table.R_well
    a0, ap0 = _wkb_start(Rm, E, table.reduced_mass, *table._args())
    if a0 < 0:
        raise DomainError("WKB start failed at the well minimum")
    sel_out = out_sorted >= Rm
    st_o, r_o, a_o, ap_o, b_out, out_o, traj_o, n_o = run.run(
        Rm, a0, ap0, 1.0, hi_span, r_out, E, out_sorted[sel_out], store)
    if st_o == 1:
        raise RangeError(f"outer phase not converged by R = {hi_span}")
    st_i, r_i, a_i, ap_i, b_in, out_i, traj_i, n_i = run.run(
        Rm, a0, ap0, -1.0, lo_span, r_in, E, out_sorted[~sel_out][::-1], store)
    outs = np.vstack([out_i[::-1], out_o]) if len(out_sorted) else np.empty((0, 3))
    outs[:, 2] -= b_in
    result[order] = outs
    tr = None
    if store:
        tr = np.vstack([traj_i[:n_i][::-1], traj_o[1:n_o]])
        tr[:, 3] -= b_in
    return b_out - b_in, False, result, tr, math.nan


def milne_integrate(table: ChannelTable, E, R_span=None, rtol=RTOL_DEFAULT, R_far=None) -> MilneSolution:
    """Full trajectory of one channel at energy E (hartree)."""
    phase, is_open, _, tr, Rf = _integrate(table, E, R_span, (), True, rtol, R_far)
    return MilneSolution(table, float(E), tr[:, 0], tr[:, 1], tr[:, 2], tr[:, 3], phase, is_open, Rf)


def accumulated_phase(table: ChannelTable, E, R_span=None) -> float:
    """nu(E) for a channel closed at E; tan nu = 0 at its single-channel levels."""
    if table.is_open(E):
        raise DomainError("channel is open at this energy; use asymptotic_shift")
    return _integrate(table, E, R_span)[0]


def asymptotic_shift(table: ChannelTable, E, R_span=None, R_far=None) -> float:
    """xi(E) of an open channel relative to sin(kR)."""
    if not table.is_open(E):
        raise DomainError("channel is closed at this energy")
    return _integrate(table, E, R_span, R_far=R_far)[0]


def reference_at(table: ChannelTable, E, R0, rtol=RTOL_DEFAULT) -> ReferenceChannel:
    """Phase and (f, g, f', g') of the channel at R0."""
    phase, is_open, out, _, _ = _integrate(table, E, None, [R0], False, rtol)
    a, ap, b = out[0]
    if not np.isfinite(a):
        raise RangeError(f"matching radius {R0} not reached")
    f, g, fp, gp = _fg(math.sqrt(2.0 * table.reduced_mass / math.pi), a, ap, b)
    if is_open:
        return ReferenceChannel(float(E), float(R0), f, g, fp, gp, xi=phase, is_open=True)
    return ReferenceChannel(float(E), float(R0), f, g, fp, gp, nu=phase)


def qdt_normalization(nu_of_E, E, step=None, spacing_fraction=1e-4):
    """N^2 = (dnu/dE) / cos^2 nu by centered differences.

    Without an explicit ``step`` the difference step is ``spacing_fraction``
    times the local level spacing pi / (dnu/dE), estimated from a first pass.
    """
    nu0 = nu_of_E(E)
    c = math.cos(nu0)
    if abs(c) < 1e-8:
        raise SingularityError(f"|cos nu| = {abs(c):.3e} at E = {E}")
    if step is None:
        h0 = 1e-7
        slope = (nu_of_E(E + h0) - nu_of_E(E - h0)) / (2.0 * h0)
        if not slope > 0:
            raise SingularityError("accumulated phase is not increasing")
        step = spacing_fraction * math.pi / slope
    d = (nu_of_E(E + step) - nu_of_E(E - step)) / (2.0 * step)
    return d / (c * c)
