import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topoprior.discretization import (
    Field, GridError, default_grid, make_grid_1d, make_grid_2d, target_example,
    weierstrass_truncated,
)


def test_grid_knots():
    g = make_grid_1d(0, 1, 4)
    np.testing.assert_allclose(g.knots, [0, 0.25, 0.5, 0.75, 1])
    assert make_grid_1d(0, 2.5, 5).h == pytest.approx(0.5)


@pytest.mark.parametrize("args", [(1, 0, 4), (0, 1, 1), (0, 0, 4), (0, 1, 2.5)])
def test_grid_errors(args):
    with pytest.raises(GridError):
        make_grid_1d(*args)


@given(a=st.floats(-10, 10), width=st.floats(1e-3, 50), m=st.integers(2, 500))
def test_endpoints_exact(a, width, m):
    b = a + width
    x = make_grid_1d(a, b, m).knots
    assert x[0] == a and x[-1] == b
    assert np.all(np.diff(x) > 0)


def test_grid_2d_layout():
    g = make_grid_2d(0, 1, 0, 2, 3, 5)
    assert g.shape == (3, 5) and g.hx == 0.5 and g.hy == 0.5
    coords = g.coordinates()
    # row-major: second knot varies y first
    np.testing.assert_allclose(coords[1], [0.0, 0.5])
    np.testing.assert_allclose(coords[5], [0.5, 0.0])
    assert g.interior().tolist() == [6, 7, 8]


def test_field_validation():
    g = make_grid_1d(0, 1, 4)
    with pytest.raises(GridError):
        Field(g, np.zeros(4))
    with pytest.raises(GridError):
        Field(g, [0, 1, np.nan, 0, 0])
    f = Field(g, np.zeros(5))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


@pytest.mark.parametrize("example_id, x, expected", [
    (0, 0.5, 1.0),
    (1, 0.5, 1.5),
    (1, 0.1, 0.5),
    (2, 0.0, 0.5),
    (2, 0.9, 1.5),
])
def test_targets_1d(example_id, x, expected):
    g = make_grid_1d(0, 1, 10)
    k = int(round(x * 10))
    assert target_example(example_id, g).values[k] == pytest.approx(expected)


def test_target_jump_conventions():
    # knots land exactly on the jumps: left-closed intervals decide
    g = make_grid_1d(0, 1, 3)
    np.testing.assert_allclose(target_example(1, g).values, [0.5, 1.5, 0.5, 0.5])
    g = make_grid_1d(0, 1, 10)
    v = target_example(2, g).values
    assert v[3] == 1.0 and v[7] == 1.5 and v[10] == 1.5
    g3 = make_grid_1d(0, 2.5, 5)
    # x = 1.5 belongs to two closed intervals; the first one listed wins
    np.testing.assert_allclose(target_example(3, g3).values, [0.5, 1.0, 0.5, 0.5, 0.5, 0.5])
    g3 = make_grid_1d(0, 2.5, 10)
    assert target_example(3, g3).values[7] == 1.5


def test_target_2d():
    g = make_grid_2d(0, 1, 0, 1, 5, 5)
    q = target_example(5, g).values
    assert q[2, 2] == 1.5 and q[0, 0] == 0.5
    g6 = default_grid(6, 21)
    q6 = target_example(6, g6).values
    x, y = g6.x, g6.y
    i06 = int(np.argmin(abs(x - 0.6)))
    i14 = int(np.argmin(abs(x - 1.4)))
    assert q6[i06, i06] == 1.0 and q6[i14, i14] == 1.5 and q6[0, -1] == 0.5


def test_dimension_mismatch():
    with pytest.raises(GridError):
        target_example(5, make_grid_1d(0, 1, 10))
    with pytest.raises(GridError):
        target_example(1, make_grid_2d(0, 1, 0, 1, 4, 4))
    with pytest.raises(ValueError):
        target_example(7, make_grid_1d(0, 1, 10))


@pytest.mark.parametrize("example_id", range(7))
def test_refinement_consistency(example_id):
    coarse = default_grid(example_id, 20 if example_id < 5 else 11)
    fine = coarse.refine(2)
    qc = target_example(example_id, coarse).values
    qf = target_example(example_id, fine).values
    if coarse.ndim == 1:
        np.testing.assert_array_equal(qf[::2], qc)
    else:
        np.testing.assert_array_equal(qf[::2, ::2], qc)


def test_weierstrass_values():
    assert weierstrass_truncated(0.0, 0.4, 4, 10) == pytest.approx(1.6665967616, abs=1e-9)
    assert weierstrass_truncated(0.0, 0.5, 3, 0) == 1.0
    assert weierstrass_truncated(1.0, 0.4, 4, 0) == pytest.approx(-1.0)
    q4 = target_example(4, make_grid_1d(0, 1, 10)).values
    assert q4[0] == pytest.approx(1.6559464802, abs=1e-9)


@settings(max_examples=50)
@given(x=st.floats(-3, 3), K=st.integers(0, 12), extra=st.integers(1, 5),
       a=st.floats(0.05, 0.95))
def test_weierstrass_tail_bound(x, K, extra, a):
    diff = abs(weierstrass_truncated(x, a, 4, K + extra) - weierstrass_truncated(x, a, 4, K))
    assert diff <= a ** (K + 1) / (1 - a) + 1e-12


def test_weierstrass_precondition():
    with pytest.raises(ValueError):
        weierstrass_truncated(0.0, 1.2, 4, 3)
    with pytest.raises(ValueError):
        weierstrass_truncated(0.0, 0.4, 4, -1)
