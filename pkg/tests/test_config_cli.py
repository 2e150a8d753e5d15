import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resonqdt import cli, gmqdt
from resonqdt.config import ConfigError, RunConfig, format_value, parse_config
from resonqdt.potential import morse_levels
from resonqdt.propagation import PropagationError
from resonqdt.units import CM_TO_HARTREE, HARTREE_TO_CM, RB85_REDUCED_MASS
from resonqdt.workbench import Workbench, pair_nearest

MORSE = """\
potential = morse
method = qdt
bound_window_cm = -40, -1
resonance_window_cm = 30, 45
phase_window_cm = 30, 31
stab_variants = 60:30, 70:40, 80:50
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def _run(tmp_path, text, command, *extra, out="out"):
    cfg = _write(tmp_path, text)
    return cli.main([command, "--config", cfg, "--out", str(tmp_path / out), *extra])


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    return [ln for ln in lines if ln.startswith("#")], body[0].split(","), [r.split(",") for r in body[1:]]


# --- configuration ------------------------------------------------------------------

def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.method == "both" and cfg.rotated


@pytest.mark.parametrize("text, line, words", [
    ("method = qdt\nfoo = 1\n", 2, "unknown key"),
    ("method = qdt\n# comment\nmethod = mfgh\n", 3, "duplicate key"),
    ("r0 = abc\n", 1, "r0"),
    ("just words\n", 1, "key = value"),
    ("rotated = maybe\n", 1, "boolean"),
    ("bound_window_cm = 1\n", 1, "two numbers"),
    ("stab_variants = 80 40\n", 1, "L:R_opt"),
    ("max_points = 2.5\n", 1, "integer"),
])
def test_parse_errors_carry_line_numbers(text, line, words):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "x.cfg")
    assert f"x.cfg:{line}:" in str(exc.value) and words in str(exc.value)


@pytest.mark.parametrize("text", [
    "method = fast\n",
    "bound_window_cm = -1, -5\n",
    "bound_window_cm = -5, 3\n",
    "resonance_window_cm = -2, 5\n",
    "stiffness_A = 0\n",
    "stab_density = 0.5\n",
    "stab_variants = 80:40, 160:120\n",
    "stab_variants = 80:90, 160:120, 180:140\n",
    "potential = no_such_file.dat\n",
    "a_opt = -1\n",
])
def test_invalid_values_exit_2(tmp_path, text, capsys):
    assert _run(tmp_path, text, "bound") == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_cli_argument_errors(tmp_path):
    assert cli.main(["bound", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["bound", "--rotated", "perhaps"]) == cli.EXIT_CONFIG
    assert cli.main(["explode"]) == cli.EXIT_CONFIG
    assert _run(tmp_path, "foo = 1\n", "bound") == cli.EXIT_CONFIG


def test_relative_potential_path(tmp_path):
    R = np.linspace(3.0, 60.0, 300)
    (tmp_path / "curves.dat").write_text("\n".join(f"{r} {-1e-3} {-1e-3} -1e-4" for r in R))
    cfg = parse_config("potential = curves.dat\n", str(tmp_path / "run.cfg"))
    assert cfg.potential_path() == str(tmp_path / "curves.dat")
    cfg.validate()


numbers = st.floats(1e-3, 1e4, allow_nan=False).map(lambda x: float(f"{x:.12g}"))


@settings(max_examples=100, deadline=None)
@given(numbers, numbers, st.booleans(), st.sampled_from(["mfgh", "qdt", "both"]),
       st.lists(st.tuples(numbers, numbers), min_size=3, max_size=5), st.integers(4, 10 ** 6))
def test_config_round_trip(r0, depth, rotated, method, variants, npts):
    cfg = RunConfig(r0=r0, depth_A_cm=depth, rotated=rotated, method=method,
                    stab_variants=tuple(variants), bound_window_cm=(-depth, -r0), max_points=npts)
    text = "\n".join(f"{k} = {v}" for k, v in cfg.items())
    back = parse_config(text)
    assert list(back.items()) == list(cfg.items())
    assert back.reduced_mass_me == cfg.reduced_mass_me and back.stab_variants == cfg.stab_variants
    assert math.isnan(back.stab_e_infty_cm)


def test_value_formatting():
    # config values are exact, data columns carry 12 significant digits
    assert float(format_value(RB85_REDUCED_MASS)) == RB85_REDUCED_MASS
    assert format_value((1.5, -2.0)) == "1.5, -2.0" and format_value(((80.0, 40.0),)) == "80.0:40.0"
    assert cli.fmt(math.pi) == "3.14159265359"
    assert cli.fmt(1 / 3) == "0.333333333333"
    assert cli.fmt(np.float64("nan")) == "nan" and cli.fmt(True) == "true" and cli.fmt(np.int64(7)) == "7"


# --- commands -----------------------------------------------------------------------

def test_bound_csv_provenance_and_determinism(tmp_path):
    assert _run(tmp_path, MORSE, "bound", out="a") == cli.EXIT_OK
    a = (tmp_path / "a" / "bound_qdt.csv").read_bytes()
    assert _run(tmp_path, MORSE, "bound", out="a") == cli.EXIT_OK
    assert a == (tmp_path / "a" / "bound_qdt.csv").read_bytes()
    head, cols, rows = _rows(tmp_path / "a" / "bound_qdt.csv")
    keys = {ln[2:].split(" = ")[0] for ln in head[1:]}
    assert keys == {k for k, _ in RunConfig().items()}
    assert "# method = qdt" in head
    assert cols == ["E_cm", "open_weight"]
    E = np.array([float(r[0]) for r in rows])
    # open and closed Morse ladders below E_open
    ladder = morse_levels(4000 * CM_TO_HARTREE, 0.5, RB85_REDUCED_MASS) * HARTREE_TO_CM
    exact = np.sort(np.concatenate([ladder, ladder + 237.6]))
    exact = exact[(exact > -40) & (exact < -1)]
    np.testing.assert_allclose(E, exact, atol=1e-3)
    assert all(len(r[0].lstrip("-").replace(".", "").lstrip("0")) <= 12 for r in rows)


def test_both_methods_on_decoupled_model(tmp_path, capsys):
    assert _run(tmp_path, MORSE, "bound", "--method", "both") == cli.EXIT_OK
    assert "max |dE|" in capsys.readouterr().out
    _, _, rm = _rows(tmp_path / "out" / "bound_mfgh.csv")
    _, _, rq = _rows(tmp_path / "out" / "bound_qdt.csv")
    np.testing.assert_allclose([float(r[0]) for r in rm], [float(r[0]) for r in rq], atol=1e-3)


def test_empty_window_writes_header_only(tmp_path):
    text = MORSE.replace("bound_window_cm = -40, -1", "bound_window_cm = -5, -5")
    assert _run(tmp_path, text, "bound", "--method", "both") == cli.EXIT_OK
    for name in ("bound_mfgh.csv", "bound_qdt.csv"):
        head, cols, rows = _rows(tmp_path / "out" / name)
        assert head and cols == ["E_cm", "open_weight"] and rows == []


def test_no_closed_level_gives_empty_resonances(tmp_path):
    # the closed Morse ladder has no level between 5 and 20 cm^-1
    text = MORSE.replace("resonance_window_cm = 30, 45", "resonance_window_cm = 5, 20")
    assert _run(tmp_path, text, "resonances") == cli.EXIT_OK
    head, cols, rows = _rows(tmp_path / "out" / "resonances_qdt.csv")
    assert cols == ["E_cm", "E0_cm", "shift_cm", "gamma_cm", "isolated"] and rows == []
    assert "# reference set = optimized" in head


def test_decoupled_resonance_is_a_sharp_closed_level(tmp_path):
    assert _run(tmp_path, MORSE, "resonances", "--rotated", "false") == cli.EXIT_OK
    head, _, rows = _rows(tmp_path / "out" / "resonances_qdt.csv")
    assert "# reference set = adiabatic" in head and "# rotated = false" in head
    ladder = morse_levels(4000 * CM_TO_HARTREE, 0.5, RB85_REDUCED_MASS) * HARTREE_TO_CM + 237.6
    assert len(rows) == 1
    E, E0, shift, gamma, iso = rows[0]
    assert float(E) == pytest.approx(ladder[(ladder > 30) & (ladder < 45)][0], abs=1e-3)
    assert float(gamma) == 0.0 and float(shift) == 0.0 and iso == "true"


def test_decoupled_phase_has_no_resonant_part(tmp_path, capsys):
    assert _run(tmp_path, MORSE, "phase") == cli.EXIT_OK
    assert "max |sin^2 dS(adiabatic) - sin^2 dS(optimized)|" in capsys.readouterr().out
    for name in ("phase_adiabatic.csv", "phase_optimized.csv"):
        _, cols, rows = _rows(tmp_path / "out" / name)
        assert cols == ["E_cm", "sin2_deltaS", "sin2_deltar", "delta_bg"]
        assert len(rows) == 201
        assert max(abs(float(r[2])) for r in rows) < 1e-20


def test_self_comparison_has_zero_deltas(tmp_path):
    assert _run(tmp_path, MORSE, "compare") == cli.EXIT_OK
    _, cols, rows = _rows(tmp_path / "out" / "compare_bound.csv")
    assert cols == ["E_qdt_cm", "E_qdt_cm", "dE_cm"] and len(rows) > 5
    assert all(float(r[2]) == 0.0 for r in rows)
    _, _, rows = _rows(tmp_path / "out" / "compare_resonances.csv")
    assert rows and all(float(r[2]) == 0.0 for r in rows)
    report = (tmp_path / "out" / "report.txt").read_text()
    assert "comparison qdt vs qdt" in report and "unmatched 0 / 0" in report


def test_mismatched_windows_list_unmatched(tmp_path):
    cfg = parse_config(MORSE + "out = " + str(tmp_path / "out") + "\n").validate()
    cfg.method = "both"
    other = parse_config(MORSE.replace("bound_window_cm = -40, -1", "bound_window_cm = -20, -1"))
    wb = Workbench(cfg)
    wb.bound_qdt = Workbench(other).bound_qdt
    os.makedirs(cfg.out)
    lines = cli.cmd_compare(cfg, wb, log=lambda s: None)
    _, _, rows = _rows(tmp_path / "out" / "compare_bound.csv")
    lonely = [r for r in rows if r[1] == "nan"]
    assert lonely and all(float(r[0]) < -20 for r in lonely)
    assert all(r[2] == "nan" for r in lonely)
    assert f"unmatched {len(lonely)} / 0" in lines[1]


def test_numerical_failure_exits_3(tmp_path, monkeypatch, capsys):
    def boom(cfg, wb):
        raise PropagationError("diverged")
    monkeypatch.setitem(cli.COMMANDS, "bound", boom)
    assert _run(tmp_path, MORSE, "bound") == cli.EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_bound_window_below_closed_well_is_config_error(tmp_path):
    text = MORSE.replace("bound_window_cm = -40, -1", "bound_window_cm = -3900, -3700")
    assert _run(tmp_path, text, "bound") == cli.EXIT_CONFIG


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), max_size=15, unique=True), st.lists(st.floats(-100, 100), max_size=15, unique=True))
def test_pairing_is_injective_and_complete(a, b):
    a, b = sorted(a), sorted(b)
    pairs, ua, ub = pair_nearest(a, b)
    ia = [i for i, _ in pairs] + ua
    ib = [j for _, j in pairs] + ub
    assert sorted(ia) == list(range(len(a))) and sorted(ib) == list(range(len(b)))


# --- dual runs on the synthetic model -----------------------------------------------

def test_rotation_leaves_positions(qdt_rotated, qdt_adiabatic):
    a = np.array([r.E_r for r in qdt_rotated.value.resonances])
    b = np.array([r.E_r for r in qdt_adiabatic.value.resonances])
    assert len(a) == len(b) > 50
    assert np.max(np.abs(a - b)) * HARTREE_TO_CM <= 1e-4


def test_phase_rises_by_pi_through_resonance(wb, qdt_rotated):
    res = qdt_rotated.value.resonances
    lo, hi = wb.resonance_window
    Er = np.array([x.E_r for x in res])

    def clear(r):
        # +-20 Gamma well inside half the level spacing
        d = np.abs(Er - r.E_r)
        return r.isolated and lo < r.E_r - 20 * r.gamma and r.E_r + 20 * r.gamma < hi \
            and np.sum(d < 160 * r.gamma) == 1
    r = next(x for x in res if clear(x))
    rot = wb.rotated_set(wb.resonance_window)
    E = r.E_r + r.gamma * np.linspace(-20, 20, 801)
    nu = np.array([wb.model.nu_c(e) for e in E])
    xi = np.array([wb.model.xi_o(e) for e in E])
    dr = gmqdt.phase_scan(rot.base, E, nu, xi, rot).delta_r
    rise = abs(dr[-1] - dr[0])
    assert rise == pytest.approx(math.pi - 2 * math.atan(1 / 40), rel=0.02)
    assert np.all(np.diff(dr) * np.sign(dr[-1] - dr[0]) > 0)
