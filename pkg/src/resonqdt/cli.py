"""Command line front end.

    resonqdt bound|resonances|phase|compare --config run.cfg [--method mfgh|qdt|both]
             [--rotated true|false] [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .config import METHODS, ConfigError, RunConfig, load_config, _bool
from .milne import RangeError, SingularityError
from .mfgh import ConfigurationError, EigenSolverError
from .potential import DomainError, InputError
from .propagation import PreconditionError, PropagationError
from .qdt import QDTError
from .resonance import FitError, time_delay
from .units import HARTREE_TO_CM
from .workbench import Workbench, pair_nearest

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (QDTError, PropagationError, EigenSolverError, RangeError, SingularityError, FitError, DomainError,
                  PreconditionError, ArithmeticError, np.linalg.LinAlgError)


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def write_csv(path, command, cfg: RunConfig, columns, rows, notes=()):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# resonqdt {__version__} {command}\n")
        for k, v in cfg.items():
            fh.write(f"# {k} = {v}\n")
        for n in notes:
            fh.write(f"# {n}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def _cm(E, V):
    return (E - V.E_open) * HARTREE_TO_CM


def _methods(cfg):
    return ("mfgh", "qdt") if cfg.method == "both" else (cfg.method,)


# --- commands ---------------------------------------------------------------------

def cmd_bound(cfg: RunConfig, wb: Workbench | None = None, log=print):
    wb = wb or Workbench(cfg)
    V = wb.V
    levels = {}
    if "mfgh" in _methods(cfg):
        E, w = wb.bound_mfgh()
        levels["mfgh"] = E
        write_csv(os.path.join(cfg.out, "bound_mfgh.csv"), "bound", cfg, ("E_cm", "open_weight"),
                  ((_cm(e, V), x) for e, x in zip(E, w)))
    if "qdt" in _methods(cfg):
        bs = wb.bound_qdt()
        levels["qdt"] = [b.E for b in bs]
        write_csv(os.path.join(cfg.out, "bound_qdt.csv"), "bound", cfg, ("E_cm", "open_weight"),
                  ((_cm(b.E, V), b.open_weight) for b in bs))
    for name, E in levels.items():
        log(f"bound {name}: {len(E)} levels")
    if len(levels) == 2:
        pairs, ua, ub = pair_nearest(levels["mfgh"], levels["qdt"])
        d = [abs(levels["qdt"][j] - levels["mfgh"][i]) * HARTREE_TO_CM for i, j in pairs]
        log(f"bound max |dE| = {fmt(max(d) if d else 0.0)} cm^-1 over {len(pairs)} pairs; "
            f"unmatched mfgh {len(ua)}, qdt {len(ub)}")
    return levels


def cmd_resonances(cfg: RunConfig, wb: Workbench | None = None, log=print):
    wb = wb or Workbench(cfg)
    V = wb.V
    out = {}
    if "mfgh" in _methods(cfg):
        rep, spectra = wb.stabilization()
        out["mfgh"] = rep
        write_csv(os.path.join(cfg.out, "resonances_mfgh.csv"), "resonances", cfg,
                  ("E_cm", "gamma_cm", "spread", "converged"),
                  ((_cm(c.E_r, V), c.gamma * HARTREE_TO_CM, c.spread, c.converged) for c in rep.candidates),
                  notes=(rep.diagnostic,) if rep.diagnostic else ())
        lo, hi = wb.resonance_window
        step = cfg.delay_step_cm / HARTREE_TO_CM
        E = lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1) if hi > lo else np.zeros(0)
        delay = np.concatenate([time_delay(spectra[0], c, V.E_open) for c in np.array_split(E, max(1, len(E) // 2000))]) \
            if len(E) else np.zeros(0)
        write_csv(os.path.join(cfg.out, "time_delay.csv"), "resonances", cfg, ("E_cm", "time_delay_au"),
                  zip(_cm(E, V), delay))
        log(f"resonances mfgh: {len(rep.converged)} converged of {len(rep)} candidates")
    if "qdt" in _methods(cfg):
        res = wb.resonances_qdt()
        out["qdt"] = res
        tag = "optimized" if res.rotated else "adiabatic"
        write_csv(os.path.join(cfg.out, "resonances_qdt.csv"), "resonances", cfg,
                  ("E_cm", "E0_cm", "shift_cm", "gamma_cm", "isolated"),
                  ((_cm(r.E_r, V), _cm(r.E0, V), r.shift * HARTREE_TO_CM, r.gamma * HARTREE_TO_CM, r.isolated)
                   for r in res.resonances), notes=(f"reference set = {tag}",))
        if res.angles is not None:
            a = res.angles
            write_csv(os.path.join(cfg.out, "rotation.csv"), "resonances", cfg,
                      ("E_cm", "theta_c", "theta_o", "Y_oc_opt"),
                      zip(_cm(a.E, V), a.theta_c, a.theta_o, res.Y_opt[:, 0, 1]))
        log(f"resonances qdt ({tag}): {len(res.resonances)}")
    return out


def cmd_phase(cfg: RunConfig, wb: Workbench | None = None, log=print):
    wb = wb or Workbench(cfg)
    V = wb.V
    scans = wb.phase_scans()
    for name, pd in (("adiabatic", scans.adiabatic), ("optimized", scans.optimized)):
        write_csv(os.path.join(cfg.out, f"phase_{name}.csv"), "phase", cfg,
                  ("E_cm", "sin2_deltaS", "sin2_deltar", "delta_bg"),
                  zip(_cm(scans.E, V), pd.sin2_delta_S, pd.sin2_delta_r, pd.delta_bg))
    log(f"phase: max |sin^2 dS(adiabatic) - sin^2 dS(optimized)| = {fmt(scans.max_deviation)}")
    return scans


def cmd_compare(cfg: RunConfig, wb: Workbench | None = None, log=print):
    """Pair bound states and resonances of two methods (a method with itself
    when only one is selected) and write the deltas."""
    wb = wb or Workbench(cfg)
    V = wb.V
    methods = _methods(cfg)
    a_name, b_name = (methods * 2)[:2]
    bound = {}
    res = {}
    for name in set(methods):
        if name == "mfgh":
            bound[name] = list(wb.bound_mfgh()[0])
            rep, _ = wb.stabilization()
            res[name] = [(c.E_r, c.gamma) for c in rep.converged]
        else:
            bound[name] = [b.E for b in wb.bound_qdt()]
            res[name] = [(r.E_r, r.gamma, r.isolated) for r in wb.resonances_qdt().resonances]
    lines = [f"comparison {a_name} vs {b_name}"]

    Ea, Eb = bound[a_name], bound[b_name]
    pairs, ua, ub = pair_nearest(Ea, Eb)
    rows = [(_cm(Ea[i], V), _cm(Eb[j], V), (Eb[j] - Ea[i]) * HARTREE_TO_CM) for i, j in pairs]
    rows += [(_cm(Ea[i], V), math.nan, math.nan) for i in ua]
    rows += [(math.nan, _cm(Eb[j], V), math.nan) for j in ub]
    rows.sort(key=lambda r: r[0] if not math.isnan(r[0]) else r[1])
    write_csv(os.path.join(cfg.out, "compare_bound.csv"), "compare", cfg, (f"E_{a_name}_cm", f"E_{b_name}_cm", "dE_cm"),
              rows)
    dmax = max((abs(r[2]) for r in rows if not math.isnan(r[2])), default=0.0)
    lines.append(f"bound: {len(pairs)} pairs, max |dE| = {fmt(dmax)} cm^-1, unmatched {len(ua)} / {len(ub)}")

    Ra, Rb = res[a_name], res[b_name]
    pairs, ua, ub = pair_nearest([r[0] for r in Ra], [r[0] for r in Rb])
    rows = []
    for i, j in pairs:
        ga, gb = Ra[i][1], Rb[j][1]
        iso = all(r[2] for r in (Ra[i], Rb[j]) if len(r) > 2)
        rows.append((_cm(Ra[i][0], V), _cm(Rb[j][0], V), (Rb[j][0] - Ra[i][0]) * HARTREE_TO_CM,
                     ga * HARTREE_TO_CM, gb * HARTREE_TO_CM, (gb - ga) / ga if ga else math.nan, iso))
    rows += [(_cm(Ra[i][0], V), math.nan, math.nan, Ra[i][1] * HARTREE_TO_CM, math.nan, math.nan, False) for i in ua]
    rows += [(math.nan, _cm(Rb[j][0], V), math.nan, math.nan, Rb[j][1] * HARTREE_TO_CM, math.nan, False) for j in ub]
    rows.sort(key=lambda r: r[0] if not math.isnan(r[0]) else r[1])
    write_csv(os.path.join(cfg.out, "compare_resonances.csv"), "compare", cfg,
              (f"E_{a_name}_cm", f"E_{b_name}_cm", "dE_cm", f"gamma_{a_name}_cm", f"gamma_{b_name}_cm",
               "rel_dgamma", "isolated"), rows)
    iso_rows = [r for r in rows if r[6] and not math.isnan(r[2])]
    dE = max((abs(r[2]) for r in iso_rows), default=0.0)
    dG = max((abs(r[5]) for r in iso_rows), default=0.0)
    lines.append(f"resonances: {len(pairs)} pairs ({len(iso_rows)} isolated), max |dE_r| = {fmt(dE)} cm^-1, "
                 f"max |dGamma|/Gamma = {fmt(dG)}, unmatched {len(ua)} / {len(ub)}")
    with open(os.path.join(cfg.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    for ln in lines:
        log(ln)
    return lines


COMMANDS = {"bound": cmd_bound, "resonances": cmd_resonances, "phase": cmd_phase, "compare": cmd_compare}


def build_parser():
    p = argparse.ArgumentParser(prog="resonqdt", description="Two-channel bound states and resonances "
                                "by mapped Fourier grid and quantum defect theory.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value configuration file (defaults when omitted)")
    p.add_argument("--method", choices=METHODS, help="override the configured method")
    p.add_argument("--rotated", type=_bool, metavar="BOOL", help="use the optimized reference set (true/false)")
    p.add_argument("--out", help="output directory")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.method:
            cfg.method = args.method
        if args.rotated is not None:
            cfg.rotated = args.rotated
        if args.out:
            cfg.out = args.out
        cfg.validate()
        os.makedirs(cfg.out, exist_ok=True)
        wb = Workbench(cfg)
    except (ConfigError, ConfigurationError, InputError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, wb)
    except (ConfigError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS + (InputError,) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
