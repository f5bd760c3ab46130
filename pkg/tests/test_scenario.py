from __future__ import annotations

import textwrap

import numpy as np
import pytest

from rigidform.errors import ConfigError
from rigidform.scenario import bundled, bundled_dir, load_scenario, parse_scenario, resolve

BASE = """\
name = "t"

[formation]
m = 2
n = 3
edges = [[2, 1], [2, 3], [3, 1]]
shape = "triangle"
side = 1.0

[initial]
mode = "box"
box = 2.0
speed_cap = 0.5

[controller]
variant = "gradient"

[sim]
t_end = 2.0
"""


def _with(old: str, new: str) -> str:
    assert old in BASE
    return BASE.replace(old, new)


BUNDLED = sorted(p.stem for p in bundled_dir().glob("*.toml"))


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_parse(name):
    scn = load_scenario(bundled(name))
    assert scn.name == name
    assert scn.sim.t_end > scn.steady_window > 0
    assert scn.description


def test_bundled_set_is_complete():
    assert {
        "fig4_tetra_est1", "fig6_hexagon_est2", "fig7_tetra_motion", "hexagon_est2_reversed",
        "shared_edge_star", "square_diagonal", "square_no_diagonal", "tetra_mismatch", "triangle_gradient",
    } <= set(BUNDLED)


def test_minimal_defaults():
    scn = parse_scenario(BASE)
    assert scn.sim.h == 1e-3 and scn.sim.record_every == 10 and scn.sim.seed == 0
    assert scn.steady_window == pytest.approx(0.4) and scn.steady_tol == 1e-3
    assert scn.figures and scn.out_dir is None
    assert scn.graph.edges == ((1, 0), (1, 2), (2, 0))  # stored 0-based
    assert np.allclose(scn.shape.d, 1.0)


def test_hexagon_scenario_contents():
    scn = load_scenario(bundled("fig6_hexagon_est2"))
    assert scn.graph.num_edges == 9 and scn.controller.kappa == 1.0
    assert scn.controller.variant == "estimator2"
    assert np.isclose(scn.shape.d.min(), 50.0) and np.isclose(scn.shape.d.max(), 100.0)


def test_motion_scenario_builds_matrices():
    scn = load_scenario(bundled("fig7_tetra_motion"))
    assert scn.motion is not None
    assert scn.controller.A.shape == (4, 6)
    assert np.allclose(scn.controller.A, scn.motion.c1 * scn.motion.A_v + scn.motion.A_a)


def test_motion_target_form():
    text = textwrap.dedent("""\
        [formation]
        m = 3
        n = 4
        edges = [[2, 1], [2, 3], [3, 1], [1, 4], [3, 4], [2, 4]]
        shape = "tetrahedron"
        side = 25.0
        [initial]
        mode = "perturbed"
        [controller]
        variant = "motion"
        v_c = [0.0, 0.0, 1.0]
        omega = [0.0, 0.0, 0.2]
        [sim]
        t_end = 1.0
        """)
    scn = parse_scenario(text)
    V = scn.motion.A_v @ scn.shape.body_zstar(scn.graph).reshape(6, 3)
    assert np.allclose(V.mean(axis=0), [0, 0, 1.0], atol=1e-9)


def test_overrides():
    scn = parse_scenario(BASE).with_overrides(seed=7, h=5e-4, t_end=3.0)
    assert (scn.sim.seed, scn.sim.h, scn.sim.t_end) == (7, 5e-4, 3.0)
    with pytest.raises(ConfigError):
        parse_scenario(BASE).with_overrides(h=-1.0)


def _error(text: str, path="s.toml") -> ConfigError:
    with pytest.raises(ConfigError) as ei:
        parse_scenario(text, path)
    return ei.value


def _line_of(text: str, needle: str) -> int:
    return next(i for i, line in enumerate(text.splitlines(), 1) if needle in line)


@pytest.mark.parametrize(
    "old,new,needle,fragment",
    [
        ("m = 2", "m = 4", "m = 4", "[formation] m"),
        ("edges = [[2, 1], [2, 3], [3, 1]]", "edges = [[2, 1], [2, 9], [3, 1]]", "edges =", "1..3"),
        ("edges = [[2, 1], [2, 3], [3, 1]]", "edges = [[2, 2], [2, 3], [3, 1]]", "edges =", "[formation] edges"),
        ('shape = "triangle"', 'shape = "pentagon"', "shape =", "unknown shape"),
        ('mode = "box"', 'mode = "grid"', "mode =", "unknown mode"),
        ("box = 2.0", "box = -2.0", "box =", "positive"),
        ('variant = "gradient"', 'variant = "pid"', "variant =", "variant must be"),
        ('variant = "gradient"', 'variant = "mismatched"', "[controller]", "needs mu"),
        ("t_end = 2.0", "t_end = 2.0\nh = \"fast\"", "h = ", "expected a number"),
        ("speed_cap = 0.5", "speed_cap = 0.5\ncolour = 1", "colour", "unknown key"),
    ],
)
def test_errors_point_at_line(old, new, needle, fragment):
    text = _with(old, new)
    err = _error(text)
    assert fragment in str(err)
    assert err.line == _line_of(text, needle)
    assert str(err).startswith(f"s.toml:{err.line}: ")


def test_wrong_length_vector():
    text = _with('variant = "gradient"', 'variant = "mismatched"\nmu = [1.0, 2.0]')
    err = _error(text)
    assert "[controller] mu" in str(err) and err.line == _line_of(text, "mu = ")


def test_syntax_error_has_line():
    text = BASE.replace("side = 1.0", "side = = 1.0")
    err = _error(text)
    assert "TOML syntax error" in str(err) and err.line == _line_of(text, "side = =")


def test_missing_section():
    err = _error(BASE.replace('[controller]\nvariant = "gradient"\n', ""))
    assert "missing section [controller]" in str(err)


def test_shape_choice_exclusive():
    err = _error(_with("side = 1.0", "side = 1.0\npositions = [[0, 0], [1, 0], [0, 1]]"))
    assert "exactly one of" in str(err)


def test_positions_shape_checked():
    text = _with('shape = "triangle"\nside = 1.0', "positions = [[0, 0], [1, 0]]")
    err = _error(text)
    assert "expected shape" in str(err) and err.line == _line_of(text, "positions")


def test_window_must_fit():
    err = _error(BASE + "\n[output]\nsteady_window = 5.0\n")
    assert "[output] steady_window" in str(err)


def test_resolve(tmp_path):
    assert resolve("fig4_tetra_est1") == bundled("fig4_tetra_est1")
    f = tmp_path / "x.toml"
    f.write_text(BASE)
    assert resolve(str(f)) == f
    with pytest.raises(ConfigError):
        resolve("no_such_scenario")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.toml")
