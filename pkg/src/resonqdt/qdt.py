"""Quantum-defect observables built from Y(E) and the reference phases.

Conventions: channel 0 is open, channel 1 closed. For a physical solution
f - g Y the closed-channel decay condition gives

    K_oo = Y_oo - Y_oc^2 / (tan nu_c + Y_cc),
    S    = exp(2 i xi) (1 + i K_oo) / (1 - i K_oo),

and the outgoing-wave (Siegert) condition on the open channel gives
K_cc = Y_cc - Y_oc^2 / (Y_oo + i). Rotating the reference functions of a
channel by theta (phase beta -> beta + theta) maps

    Y -> (C Y - S)(C + S Y)^-1,   C = diag(cos theta), S = diag(sin theta),

and shifts nu_c -> nu_c + theta_c, xi -> xi + theta_o.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .units import CM_TO_HARTREE

ROOT_TOL = 1e-6 * CM_TO_HARTREE
ISOLATION_RATIO = 0.2


class QDTError(ArithmeticError):
    pass


class MeshError(QDTError):
    """Root bracketing failed even after densifying the mesh."""


# --- records ----------------------------------------------------------------------

@dataclass(frozen=True)
class BoundState:
    E: float
    open_weight: float


@dataclass(frozen=True)
class Resonance:
    """One resonance; energies in hartree.

    ``E_r`` is the real part of the complex root of tan nu_c + K_cc = 0,
    ``E0`` the root of tan nu_c + Y_cc = 0, ``shift`` and ``gamma`` the
    first-order formulas. ``gamma_pole`` is -2 Im of the complex root.
    """

    E_r: float
    E0: float
    shift: float
    gamma: float
    isolated: bool = True
    gamma_pole: float = math.nan
    N2_E0: float = math.nan
    N2_Er: float = math.nan

    @property
    def first_order_position(self):
        return self.E0 + self.shift


@dataclass(frozen=True)
class RotationAngles:
    E: np.ndarray
    theta_c: np.ndarray
    theta_o: np.ndarray


@dataclass(frozen=True)
class PhaseDecomposition:
    E: np.ndarray
    delta_S: np.ndarray
    xi_o: np.ndarray
    delta_K: np.ndarray
    delta_bg: np.ndarray
    delta_r: np.ndarray

    @property
    def sin2_delta_S(self):
        return np.sin(self.delta_S) ** 2

    @property
    def sin2_delta_r(self):
        return np.sin(self.delta_r) ** 2


# --- matrix algebra ----------------------------------------------------------------

def k_oo(Y, nu_c):
    """Open-open reaction matrix element; Y has shape (..., 2, 2)."""
    Y = np.asarray(Y)
    return Y[..., 0, 0] - Y[..., 0, 1] * Y[..., 1, 0] / (np.tan(nu_c) + Y[..., 1, 1])


def k_oo_regular(Y, nu_c):
    """K_oo as numerator/denominator pair free of tan poles."""
    Y = np.asarray(Y)
    s, c = np.sin(nu_c), np.cos(nu_c)
    den = s + Y[..., 1, 1] * c
    num = Y[..., 0, 0] * den - Y[..., 0, 1] * Y[..., 1, 0] * c
    return num, den


def s_matrix(K, xi):
    K = np.asarray(K, dtype=float)
    return np.exp(2j * np.asarray(xi)) * (1.0 + 1j * K) / (1.0 - 1j * K)


def k_cc_siegert(Y):
    Y = np.asarray(Y)
    yoo = Y[..., 0, 0]
    q = Y[..., 0, 1] * Y[..., 1, 0] / (1.0 + yoo * yoo)
    return Y[..., 1, 1] - q * yoo + 1j * q


def first_order_width(Y, N2):
    """Gamma = 2 N^-2 Y_co Y_oc / (1 + Y_oo^2)."""
    Y = np.asarray(Y)
    return 2.0 * Y[..., 0, 1] * Y[..., 1, 0] / ((1.0 + Y[..., 0, 0] ** 2) * N2)


def first_order_shift(Y, N2):
    Y = np.asarray(Y)
    return Y[..., 0, 1] * Y[..., 1, 0] * Y[..., 0, 0] / ((1.0 + Y[..., 0, 0] ** 2) * N2)


def rotate_Y(Y, theta_o=0.0, theta_c=0.0):
    """(C Y - S)(C + S Y)^-1 for per-channel rotation angles; broadcasts over leading axes."""
    Y = np.asarray(Y, dtype=float)
    th = np.stack(np.broadcast_arrays(np.asarray(theta_o, dtype=float), np.asarray(theta_c, dtype=float)), -1)
    th = np.broadcast_to(th, Y.shape[:-1])
    C = np.cos(th)[..., :, None] * np.eye(2)
    S = np.sin(th)[..., :, None] * np.eye(2)
    num = C @ Y - S
    den = C + S @ Y
    return np.linalg.solve(np.swapaxes(den, -1, -2), np.swapaxes(num, -1, -2)).swapaxes(-1, -2)


def unwrap(values, period):
    """Remove jumps by adding multiples of ``period`` closest to the previous point."""
    v = np.array(values, dtype=float)
    if v.size < 2:
        return v
    d = np.diff(v)
    shift = -period * np.round(d / period)
    return v + np.concatenate([[0.0], np.cumsum(shift)])


def theta_c_principal(K):
    """Root of tan(2 theta) = 2 Re K / (1 - |K|^2) with |K_rot| <= 1."""
    K = np.asarray(K)
    return 0.5 * np.arctan2(2.0 * K.real, 1.0 - np.abs(K) ** 2)


def align_branch(theta, reference, period):
    """theta + n*period closest to ``reference``."""
    return theta + period * np.round((reference - theta) / period)


def open_angle(Y, theta_c):
    """arctan of Y_oo after the closed-channel rotation, in a pole-free form."""
    Y = np.asarray(Y, dtype=float)
    c, s = np.cos(theta_c), np.sin(theta_c)
    den = c + s * Y[..., 1, 1]
    num = Y[..., 0, 0] * den - Y[..., 0, 1] * Y[..., 1, 0] * s
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(den != 0.0, np.arctan(num / np.where(den != 0.0, den, 1.0)),
                        np.copysign(0.5 * math.pi, num))


def optimize_rotation(E, Y):
    """Two-step rotation on a mesh; returns (RotationAngles, Y_opt, Y_step1).

    Step 1 rotates the closed channel so that Re K_cc vanishes; step 2
    rotates the open channel by theta_o = arctan Y_oo, which zeroes both
    diagonal elements. Angles are unwrapped along the mesh.
    """
    E = np.asarray(E, dtype=float)
    Y = np.asarray(Y, dtype=float)
    K = k_cc_siegert(Y)
    theta_c = unwrap(theta_c_principal(K), 0.5 * math.pi)
    theta_o = unwrap(open_angle(Y, theta_c), math.pi)
    # the two channel rotations commute; applying them together avoids the
    # pole of the intermediate matrix when cos theta_c + sin theta_c Y_cc = 0
    Y_opt = rotate_Y(Y, theta_o, theta_c)
    with np.errstate(divide="ignore", invalid="ignore"):
        Y1 = rotate_Y(Y, 0.0, theta_c)
    return RotationAngles(E, theta_c, theta_o), Y_opt, Y1


def phase_decomposition(E, Y, nu_c, xi) -> PhaseDecomposition:
    """delta_S = xi + delta_K, delta_K = arctan K_oo, delta_bg = arctan Y_oo,
    delta_r = delta_K - delta_bg; each unwrapped in E."""
    E = np.asarray(E, dtype=float)
    Y = np.asarray(Y, dtype=float)
    num, den = k_oo_regular(Y, nu_c)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # 0/0 only for vanishing coupling on an uncoupled closed level: K_oo -> Y_oo
        ratio = np.where((num == 0.0) & (den == 0.0), Y[..., 0, 0], num / den)
        dK = unwrap(np.arctan(ratio), math.pi)
    dbg = unwrap(np.arctan(Y[..., 0, 0]), math.pi)
    xi = np.asarray(xi, dtype=float) * np.ones_like(E)
    return PhaseDecomposition(E, xi + dK, xi, dK, dbg, dK - dbg)


# --- root finding -----------------------------------------------------------------

def _bracket_roots(F, mesh, max_depth=8):
    """Sign changes of F on the mesh; intervals are subdivided where F has an
    interior extremum that might hide a root pair."""
    vals = np.array([F(e) for e in mesh])
    brackets = []
    for a, b, fa, fb in zip(mesh[:-1], mesh[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            brackets.append((a, a))
        elif fa * fb < 0.0:
            brackets.append((a, b))
    return brackets, vals


def _adaptive_mesh(phase, lo, hi, max_dphase=math.pi / 8, n_min=8):
    """Mesh on [lo, hi] with phase increments below ``max_dphase``."""
    mesh = np.linspace(lo, hi, n_min + 1)
    ph = np.array([phase(e) for e in mesh])
    for _ in range(40):
        bad = np.nonzero(np.abs(np.diff(ph)) > max_dphase)[0]
        if len(bad) == 0:
            return mesh, ph
        mids = 0.5 * (mesh[bad] + mesh[bad + 1])
        mesh = np.insert(mesh, bad + 1, mids)
        ph = np.insert(ph, bad + 1, [phase(e) for e in mids])
    raise MeshError("phase mesh did not converge")


def _cached(fn):
    store = {}

    def wrapped(E):
        key = float(E)
        if key not in store:
            store[key] = fn(key)
        return store[key]
    return wrapped


def _refine(F, a, b, xtol=ROOT_TOL):
    if a == b:
        return a
    return brentq(F, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def bound_states(Y_of_E: Callable, nu_c: Callable, window: Sequence[float], nu_o: Callable | None = None,
                 xtol=ROOT_TOL) -> list:
    """Bound levels inside ``window`` (hartree).

    With ``nu_o`` given, both channels are closed and the levels are the
    roots of det(diag(tan nu_o, tan nu_c) + Y) = 0, written pole-free as
    (sin nu_o + Y_oo cos nu_o)(sin nu_c + Y_cc cos nu_c) - Y_oc^2 cos nu_o cos nu_c.
    Without it only the closed-channel condition tan nu_c + Y_cc = 0 is used.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        return []
    nu_c = _cached(nu_c)
    if nu_o is not None:
        nu_o = _cached(nu_o)

    def phase(E):
        s = nu_c(E)
        if nu_o is not None:
            s += nu_o(E)
        return s

    def F(E):
        Y = Y_of_E(E)
        nc = nu_c(E)
        fc = math.sin(nc) + Y[1, 1] * math.cos(nc)
        if nu_o is None:
            return fc
        no = nu_o(E)
        fo = math.sin(no) + Y[0, 0] * math.cos(no)
        return fo * fc - Y[0, 1] * Y[1, 0] * math.cos(no) * math.cos(nc)

    for depth in range(3):
        mesh, _ = _adaptive_mesh(phase, lo, hi, max_dphase=math.pi / (8 * 2 ** depth))
        brackets, vals = _bracket_roots(F, mesh)
        roots = [_refine(F, a, b, xtol) for a, b in brackets]
        # a pair of roots between two mesh points shows up as one missing sign
        # change; densify and compare counts
        mesh2, _ = _adaptive_mesh(phase, lo, hi, max_dphase=math.pi / (16 * 2 ** depth))
        if len(_bracket_roots(F, mesh2)[0]) == len(roots):
            break
    else:
        raise MeshError("root count changes under mesh refinement")
    out = []
    for E in roots:
        out.append(BoundState(E, _open_weight(Y_of_E(E), nu_c, nu_o, E)))
    return out


def _open_weight(Y, nu_c, nu_o, E, h=1e-9):
    """Open-channel share a_o^2 N_o^2 / sum a_i^2 N_i^2 of the bound solution."""
    if nu_o is None:
        return 0.0
    no, nc = nu_o(E), nu_c(E)
    A = np.array([[math.tan(no) + Y[0, 0], Y[0, 1]], [Y[1, 0], math.tan(nc) + Y[1, 1]]])
    # null vector from the row with the larger norm
    row = A[0] if np.linalg.norm(A[0]) >= np.linalg.norm(A[1]) else A[1]
    a = np.array([row[1], -row[0]])
    dno = (nu_o(E + h) - nu_o(E - h)) / (2 * h)
    dnc = (nu_c(E + h) - nu_c(E - h)) / (2 * h)
    w_o = a[0] ** 2 * dno / math.cos(no) ** 2
    w_c = a[1] ** 2 * dnc / math.cos(nc) ** 2
    return float(w_o / (w_o + w_c))


def normalization(nu: Callable, E, spacing_fraction=1e-4):
    """N^2 = nu'(E) / cos^2 nu(E) with a step of ``spacing_fraction`` level spacings."""
    from .milne import qdt_normalization
    return qdt_normalization(nu, E, spacing_fraction=spacing_fraction)


def _chebyshev_nodes(a, b, n):
    k = np.arange(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * np.cos(math.pi * (k + 0.5) / n)


def complex_pole(Y_of_E: Callable, nu_c: Callable, E0, half_window, gamma_guess, degree=10):
    """Complex root of tan nu_c(E) + K_cc(E) = 0 near E0.

    nu_c and Y are continued off the real axis through Chebyshev
    interpolants on [E0 - half_window, E0 + half_window].
    """
    a, b = E0 - half_window, E0 + half_window
    x = _chebyshev_nodes(a, b, degree + 1)
    t = (x - E0) / half_window
    nus = np.array([nu_c(e) for e in x])
    Ys = np.array([Y_of_E(e) for e in x])
    p_nu = np.polynomial.Chebyshev.fit(t, nus, degree, domain=[-1, 1])
    p_y = [np.polynomial.Chebyshev.fit(t, Ys[:, i, j], degree, domain=[-1, 1]) for i, j in ((0, 0), (0, 1), (1, 1))]

    def G(z):
        tz = (z - E0) / half_window
        yoo, yoc, ycc = (p(tz) for p in p_y)
        nu = p_nu(tz)
        # sin nu + K cos nu keeps G finite where cos nu -> 0
        kcc = ycc - yoc * yoc / (yoo + 1j)
        return np.sin(nu) + kcc * np.cos(nu)

    z = complex(E0, -0.5 * gamma_guess)
    for _ in range(60):
        g = G(z)
        dz = 1e-7 * half_window
        dg = (G(z + dz) - G(z - dz)) / (2 * dz)
        step = g / dg
        z -= step
        if abs(step) < 1e-15 * max(1.0, abs(z)) + 1e-16:
            break
        if abs(z.real - E0) > half_window:
            raise QDTError("pole search left the interpolation window")
    return z


def resonances(Y_of_E: Callable, nu_c: Callable, window: Sequence[float], N2: Callable | None = None,
               Y_pole: Callable | None = None, nu_pole: Callable | None = None, seeds=None,
               xtol=ROOT_TOL, pole_fraction=0.4, domain=None) -> list:
    """Resonances inside ``window`` (hartree) from the providers Y(E), nu_c(E).

    E0 are the roots of tan nu_c + Y_cc = 0; shift and width follow the
    first-order formulas with N^2 from ``N2`` (default: finite differences
    of ``nu_c``). The position E_r is the real part of the complex pole of
    tan nu_c + K_cc, computed with ``Y_pole``/``nu_pole`` (default: the same
    providers). The pole does not depend on the reference rotation, so a
    caller may pass ``seeds`` = [(E, gamma), ...] from a better-conditioned
    set; each pole is then paired with the nearest E0 of this set.
    ``domain`` bounds the energies at which the providers may be called
    off the window (the pole search samples around each seed).

    A resonance is flagged non-isolated when its width exceeds 0.2 of the
    local spacing, when its pole leaves the bracket of neighbouring E0, or
    when the pairing of E0 to poles is not one-to-one.
    """
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        return []
    nu_c = _cached(nu_c)
    if N2 is None:
        N2 = lambda E: normalization(nu_c, E)
    Yp = Y_pole or Y_of_E
    nup = nu_pole or nu_c

    def F(E):
        Y = Y_of_E(E)
        nc = nu_c(E)
        return math.sin(nc) + Y[1, 1] * math.cos(nc)

    mesh, _ = _adaptive_mesh(nu_c, lo, hi)
    brackets, _ = _bracket_roots(F, mesh)
    E0s = np.array([_refine(F, a, b, xtol) for a, b in brackets])
    if len(E0s) == 0:
        return []
    first = []
    for E0 in E0s:
        Y0 = Y_of_E(E0)
        n0 = N2(E0)
        first.append((n0, float(first_order_shift(Y0, n0)), float(first_order_width(Y0, n0))))

    def spacing_at(E, pool):
        gaps = np.abs(pool - E)
        gaps = np.sort(gaps[gaps > 0])
        if len(gaps):
            return float(gaps[0]) if len(gaps) == 1 else float(min(gaps[0], gaps[1]))
        return math.pi / max(_slope(nu_c, E), 1e-300)

    if seeds is None:
        seeds = [(E0 + d, g) for E0, (_, d, g) in zip(E0s, first)]
    seeds = sorted(seeds)
    seed_E = np.array([sd[0] for sd in seeds])
    poles = []
    for (Es, gs) in seeds:
        half = pole_fraction * spacing_at(Es, seed_E)
        if domain is not None:
            half = min(half, Es - domain[0], domain[1] - Es)
        try:
            z = complex_pole(Yp, nup, Es, half, min(abs(gs), half))
        except (QDTError, np.linalg.LinAlgError, ZeroDivisionError):
            z = complex(math.nan, math.nan)
        poles.append(z)
    out = []
    taken = {}
    for k, z in enumerate(poles):
        E_ref = z.real if np.isfinite(z.real) else seed_E[k]
        if not lo <= E_ref <= hi:
            continue
        i = int(np.argmin(np.abs(E0s - E_ref)))
        taken.setdefault(i, []).append(len(out))
        n0, shift, gam0 = first[i]
        E0 = float(E0s[i])
        isolated = bool(np.isfinite(z.real))
        E_r = z.real if isolated else E0 + shift
        left = E0s[i - 1] if i > 0 else -math.inf
        right = E0s[i + 1] if i + 1 < len(E0s) else math.inf
        if not left < E_r < right:
            isolated = False
        nr = N2(E_r)
        gam = float(first_order_width(Y_of_E(E_r), nr))
        spacing = spacing_at(E0, E0s)
        if gam > ISOLATION_RATIO * spacing or abs(E0 + shift - E_r) > max(abs(gam), 10.0 * xtol):
            isolated = False
        out.append(Resonance(float(E_r), E0, shift, gam, isolated, -2.0 * z.imag, n0, nr))
    for i, idx in taken.items():
        if len(idx) > 1:
            for j in idx:
                out[j] = _replace(out[j], isolated=False)
    return out


def _replace(r: Resonance, **kw):
    from dataclasses import replace
    return replace(r, **kw)


def _slope(nu, E, h=1e-8):
    return (nu(E + h) - nu(E - h)) / (2 * h)
