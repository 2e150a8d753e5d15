"""Renormalized Numerov propagation of the coupled equations.

The regular solution matrix of Psi'' = 2 mu (V - E) Psi is propagated from
deep inside the inner wall to the matching radius as the ratio matrices
R_n = F_{n+1} F_n^-1 with F = (1 - T) Psi, T = (h^2/12) 2 mu (V - E).
The log-derivative at R0 follows from the fourth-order derivative formula

    2 h Psi'_N = (1 - 2 T_{N+1}) Psi_{N+1} - (1 - 2 T_{N-1}) Psi_{N-1}.

Steps are uniform in R. Results on successively halved steps are combined by
Richardson extrapolation (error terms h^4, h^6) until they are stable.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .potential import AdiabaticPair, ChannelPotentialMatrix, DomainError, InputError

R0_DEFAULT = 13.0
STABILITY_TOL = 1e-9
ROUNDOFF_TOL = 1e-6
DECAY_EXPONENT = 30.0


class PreconditionError(ValueError):
    pass


class PropagationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LogDerivative:
    L: np.ndarray
    R: float
    E: float
    representation: str = "diabatic"

    def __post_init__(self):
        if self.representation not in ("diabatic", "adiabatic"):
            raise InputError(f"unknown representation {self.representation!r}")
        if not np.all(np.isfinite(self.L)):
            raise PropagationError("non-finite log-derivative")

    @property
    def asymmetry(self):
        return abs(self.L[0, 1] - self.L[1, 0])


@dataclass(frozen=True)
class YMatrixAtEnergy:
    E: float
    Y: np.ndarray
    representation: str
    R0: float

    @property
    def asymmetry(self):
        return abs(self.Y[0, 1] - self.Y[1, 0]) / max(1.0, abs(self.Y[0, 1]))


# --- kernel -----------------------------------------------------------------------

@njit(cache=True)
def _inv2(a, b, c, d):
    det = a * d - b * c
    return d / det, -b / det, -c / det, a / det


@njit(cache=True)
def _mul2(a0, a1, a2, a3, b0, b1, b2, b3):
    return (a0 * b0 + a1 * b2, a0 * b1 + a1 * b3, a2 * b0 + a3 * b2, a2 * b1 + a3 * b3)


@njit(cache=True)
def _numerov(voo, vcc, voc, h, energies, mu):
    """Log-derivative at index N = len - 2 for each energy; Psi = 0 at index 0."""
    n_pts = voo.shape[0]
    N = n_pts - 2
    out = np.empty((energies.shape[0], 2, 2))
    c = h * h / 12.0 * 2.0 * mu
    for e in range(energies.shape[0]):
        E = energies[e]
        # R_{n-1}^-1 starts at zero (Psi_0 = 0)
        p0 = 0.0
        p1 = 0.0
        p2 = 0.0
        p3 = 0.0
        r0 = r1 = r2 = r3 = 0.0
        q0 = q1 = q2 = q3 = 0.0
        for n in range(1, N + 1):
            t0 = c * (voo[n] - E)
            t1 = c * voc[n]
            t3 = c * (vcc[n] - E)
            i0, i1, i2, i3 = _inv2(1.0 - t0, -t1, -t1, 1.0 - t3)
            u0 = 12.0 * i0 - 10.0
            u1 = 12.0 * i1
            u2 = 12.0 * i2
            u3 = 12.0 * i3 - 10.0
            q0, q1, q2, q3 = p0, p1, p2, p3
            r0 = u0 - p0
            r1 = u1 - p1
            r2 = u2 - p2
            r3 = u3 - p3
            p0, p1, p2, p3 = _inv2(r0, r1, r2, r3)
        # q = R_{N-1}^-1, r = R_N
        tp0 = c * (voo[N + 1] - E)
        tp1 = c * voc[N + 1]
        tp3 = c * (vcc[N + 1] - E)
        tm0 = c * (voo[N - 1] - E)
        tm1 = c * voc[N - 1]
        tm3 = c * (vcc[N - 1] - E)
        a0, a1, a2, a3 = _inv2(1.0 - tp0, -tp1, -tp1, 1.0 - tp3)
        a0, a1, a2, a3 = _mul2(1.0 - 2.0 * tp0, -2.0 * tp1, -2.0 * tp1, 1.0 - 2.0 * tp3, a0, a1, a2, a3)
        a0, a1, a2, a3 = _mul2(a0, a1, a2, a3, r0, r1, r2, r3)
        b0, b1, b2, b3 = _inv2(1.0 - tm0, -tm1, -tm1, 1.0 - tm3)
        b0, b1, b2, b3 = _mul2(1.0 - 2.0 * tm0, -2.0 * tm1, -2.0 * tm1, 1.0 - 2.0 * tm3, b0, b1, b2, b3)
        b0, b1, b2, b3 = _mul2(b0, b1, b2, b3, q0, q1, q2, q3)
        t0 = c * (voo[N] - E)
        t1 = c * voc[N]
        t3 = c * (vcc[N] - E)
        l0, l1, l2, l3 = _mul2(a0 - b0, a1 - b1, a2 - b2, a3 - b3, 1.0 - t0, -t1, -t1, 1.0 - t3)
        out[e, 0, 0] = l0 / (2.0 * h)
        out[e, 0, 1] = l1 / (2.0 * h)
        out[e, 1, 0] = l2 / (2.0 * h)
        out[e, 1, 1] = l3 / (2.0 * h)
    return out


# --- drivers ----------------------------------------------------------------------

def _potential_minimum(V: ChannelPotentialMatrix, R_hi):
    R = np.linspace(V.R_min, R_hi, 20001)
    return float(np.min(AdiabaticPair(V).lower(R)))


def kinetic_scale(V: ChannelPotentialMatrix, E, R_hi=R0_DEFAULT):
    """Largest local kinetic energy E - min V_- inside the interaction region."""
    return max(float(E) - _potential_minimum(V, R_hi), 0.0)


def default_R_start(V: ChannelPotentialMatrix, E_max, R0=R0_DEFAULT):
    """Radius inside the wall where both channels sit 10 kinetic scales above E_max
    and the regular solution has decayed by exp(-30) from the turning point."""
    R = np.linspace(V.R_min, R0, 40001)
    voo, vcc, _ = V.elements(R)
    vlow = np.minimum(voo, vcc)
    scale = kinetic_scale(V, E_max, R0)
    ok = (vlow - E_max) > 10.0 * scale
    allowed = np.nonzero(vlow < E_max)[0]
    if len(allowed) == 0:
        raise DomainError("no classically allowed region below R0")
    i_turn = allowed[0]
    kappa = np.sqrt(np.maximum(2.0 * V.reduced_mass * (vlow[:i_turn] - E_max), 0.0))
    dR = R[1] - R[0]
    decay = np.cumsum(kappa[::-1])[::-1] * dR
    cand = np.nonzero(ok[:i_turn] & (decay > DECAY_EXPONENT))[0]
    if len(cand) == 0:
        raise PreconditionError("potential table does not reach deep enough into the inner wall")
    return float(R[cand[-1]])


def check_R_start(V: ChannelPotentialMatrix, E, R_start):
    voo, vcc, _ = V.elements(np.array([R_start]))
    scale = kinetic_scale(V, E)
    if not min(voo[0], vcc[0]) - E > 10.0 * scale:
        raise PreconditionError(f"R_start = {R_start} is not deep in the forbidden region")


def _grid(V, R_start, R0, h):
    n = int(math.ceil((R0 - R_start) / h))
    h = (R0 - R_start) / n
    R = R_start + h * np.arange(n + 2)
    voo, vcc, voc = V.elements(R)
    return voo, vcc, voc, h


def default_step(V: ChannelPotentialMatrix, E_max, R0=R0_DEFAULT):
    """Base step: 0.25 / k_max, k_max the largest local wave number below R0."""
    k = math.sqrt(2.0 * V.reduced_mass * max(kinetic_scale(V, E_max, R0), 1e-12))
    return 0.25 / k


def _raw_scan(V, energies, R_start, R0, h):
    voo, vcc, voc, h = _grid(V, R_start, R0, h)
    return _numerov(voo, vcc, voc, h, energies, V.reduced_mass)


def logderivative_scan(V: ChannelPotentialMatrix, energies, R_start=None, R0=R0_DEFAULT, step=None,
                       tol=STABILITY_TOL, max_halvings=6, check_start=True):
    """Diabatic L(R0) for an array of energies, shape (n, 2, 2).

    Psi vanishes at ``R_start``; ``check_start=False`` accepts a start that is
    not deep in the forbidden region (an exact node, as for a hard wall).

    Steps halve until the doubly extrapolated result changes by less than
    ``tol`` relative. Rounding error in the three-term recursion grows as
    the step shrinks, so once the change stops decreasing the estimate with
    the smallest change is returned; a warning is issued only when that
    change is still above ``ROUNDOFF_TOL``.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    E_max = float(np.max(energies))
    if R_start is None:
        R_start = default_R_start(V, E_max, R0)
    elif check_start:
        check_R_start(V, E_max, R_start)
    if R0 <= R_start:
        raise InputError("R0 must exceed R_start")
    h = step or default_step(V, E_max, R0)
    raw = [_raw_scan(V, energies, R_start, R0, h / 2 ** i) for i in range(3)]
    prev = None
    best_est, best_change, rising = None, math.inf, 0
    for level in range(max_halvings + 1):
        a, b, c = raw[-3:]
        r1 = (16.0 * b - a) / 15.0
        r2 = (16.0 * c - b) / 15.0
        est = (64.0 * r2 - r1) / 63.0
        if prev is not None:
            change = float(np.max(np.abs(est - prev) / np.maximum(1.0, np.abs(est))))
            if change < tol:
                return est
            if change < best_change:
                best_est, best_change, rising = est, change, 0
            else:
                rising += 1
                if rising >= 2:
                    break
        prev = est
        if level < max_halvings:
            raw.append(_raw_scan(V, energies, R_start, R0, h / 2 ** (len(raw))))
    if best_change > ROUNDOFF_TOL:
        warnings.warn(f"log-derivative stable only to {best_change:.1e} after {len(raw) - 3} halvings",
                      RuntimeWarning)
    return best_est if best_est is not None else prev


def propagate_logderivative(V: ChannelPotentialMatrix, E, R_start=None, R0=R0_DEFAULT, step=None,
                            tol=STABILITY_TOL) -> LogDerivative:
    if not V.coupling_range < R0:
        raise PreconditionError(f"R0 = {R0} inside the coupling range {V.coupling_range}")
    L = logderivative_scan(V, [E], R_start, R0, step, tol)[0]
    return LogDerivative(L, float(R0), float(E), "diabatic")


def to_adiabatic(L: LogDerivative, M) -> LogDerivative:
    """L_adia = M L_dia M^T for M with the adiabatic eigenvectors as rows."""
    if L.representation != "diabatic":
        raise InputError("expected a diabatic log-derivative")
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2) or np.max(np.abs(M @ M.T - np.eye(2))) > 1e-12:
        raise InputError("mixing matrix is not orthogonal")
    return LogDerivative(M @ L.L @ M.T, L.R, L.E, "adiabatic")


def extract_Y(L: LogDerivative, ref_open, ref_closed) -> YMatrixAtEnergy:
    """Y = [L g - g']^-1 [L f - f'] with diagonal reference matrices."""
    if L.representation != "adiabatic":
        raise InputError("Y extraction needs the adiabatic log-derivative")
    for r in (ref_open, ref_closed):
        if abs(r.R0 - L.R) > 1e-12 or abs(r.E - L.E) > 1e-14 * max(1.0, abs(L.E)):
            raise InputError("reference functions evaluated at a different R0 or E")
    Y = _y_from(L.L, ref_open, ref_closed)
    return YMatrixAtEnergy(L.E, Y, "adiabatic", L.R)


def _y_from(L, ro, rc):
    f = np.diag([ro.f, rc.f])
    g = np.diag([ro.g, rc.g])
    fp = np.diag([ro.fp, rc.fp])
    gp = np.diag([ro.gp, rc.gp])
    A = L @ g - gp
    if abs(np.linalg.det(A)) < 1e-14 * np.linalg.norm(A) ** 2:
        raise np.linalg.LinAlgError("singular [L g - g']")
    return np.linalg.solve(A, L @ f - fp)
