import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fintime import hopfield
from fintime.setvalued import (
    AffineImage,
    Box,
    Jump,
    MonotoneScalarFunction,
    Singleton,
    VertexOverflowError,
    VertexPolytope,
    filippov_interval,
    point_set_distance,
    product_box,
    sup_norm,
    support_value,
    vertices,
)
from oracles import dense_segment_distance, one_sided_limit


def as_set(arr):
    return {tuple(np.round(r, 12)) for r in np.asarray(arr)}


# Filippov intervals ---------------------------------------------------------

def test_filippov_sign():
    sgn = MonotoneScalarFunction.sign()
    assert filippov_interval(sgn, 0.0) == (-1.0, 1.0)
    assert filippov_interval(sgn, 0.3) == (1.0, 1.0)


def test_filippov_continuous():
    f = MonotoneScalarFunction(math.atan)
    for x in (-2.0, 0.0, 0.7):
        lo, hi = filippov_interval(f, x)
        assert lo == hi == math.atan(x)


def test_filippov_floor_matches_sampling_oracle():
    floor = MonotoneScalarFunction(math.floor)  # jumps undeclared: sampled
    lo, hi = filippov_interval(floor, 2.0)
    assert lo == pytest.approx(one_sided_limit(math.floor, 2.0, -1), abs=1e-9)
    assert hi == pytest.approx(one_sided_limit(math.floor, 2.0, +1), abs=1e-9)
    assert (lo, hi) == pytest.approx((1.0, 2.0), abs=1e-9)


def test_filippov_saturated_step():
    f = MonotoneScalarFunction.saturated_step(0.5, 0.1)
    assert filippov_interval(f, 0.5) == (0.5, 0.6)
    assert filippov_interval(f, -0.5) == (-0.6, -0.5)
    assert filippov_interval(f, 0.2) == (0.2, 0.2)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6, unique=True),
       st.lists(st.floats(0.01, 2), min_size=6, max_size=6),
       st.floats(-6, 6), st.booleans())
def test_filippov_brackets_value(points, heights, x, declared):
    pts = sorted(points)
    hs = heights[:len(pts)]

    def f(y):
        return sum(h for p, h in zip(pts, hs) if y >= p)

    jumps = tuple(Jump(p, f(p) - h, f(p)) for p, h in zip(pts, hs)) if declared else None
    mf = MonotoneScalarFunction(f, jumps)
    for probe in [x] + pts:
        lo, hi = filippov_interval(mf, probe)
        assert lo <= mf(probe) <= hi


def test_check_monotone():
    assert MonotoneScalarFunction.sign().check_monotone(np.linspace(-1, 1, 11))
    assert not MonotoneScalarFunction(lambda x: -x).check_monotone([0, 1])


# product boxes and vertices -------------------------------------------------

def test_product_box_examples():
    b = product_box([(-1, 1), (0, 0)])
    assert isinstance(b, Box)
    assert np.array_equal(b.lower, [-1, 0]) and np.array_equal(b.upper, [1, 0])
    s = product_box([(2, 2)])
    assert isinstance(s, Singleton) and s.point.tolist() == [2.0]
    cube = product_box([(0, 1)] * 3)
    assert vertices(cube).shape == (8, 3)


def test_vertex_examples():
    assert as_set(vertices(Box([0, 0], [1, 1]))) == {(0, 0), (1, 0), (0, 1), (1, 1)}
    assert as_set(vertices(Singleton([3, 4]))) == {(3, 4)}
    img = AffineImage(np.array([[1, 0], [0, 2]]), np.array([1, 0]), Box([0, 0], [1, 1]))
    assert as_set(vertices(img)) == {(1, 0), (2, 0), (1, 2), (2, 2)}


def test_collapsed_sides_deduplicated():
    assert vertices(Box([0, 0, 0], [1, 0, 1])).shape == (4, 3)


def test_vertex_cap():
    with pytest.raises(VertexOverflowError):
        vertices(Box(np.zeros(21), np.ones(21)))
    with pytest.raises(VertexOverflowError):
        vertices(Box(np.zeros(4), np.ones(4)), cap=3)


def test_invalid_sets():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Singleton([math.inf])


# distances and support ------------------------------------------------------

def test_distance_examples():
    unit = Box([0, 0], [1, 1])
    assert point_set_distance([0.5, 0.5], unit) == 0.0
    assert point_set_distance([2, 0], unit) == 1.0
    seg = VertexPolytope([[0, 0], [1, 0]])
    oracle = dense_segment_distance([1, 1], [0, 0], [1, 0])
    assert point_set_distance([1, 1], seg) == pytest.approx(oracle, abs=1e-9)
    assert point_set_distance([1, 1], seg) == pytest.approx(1.0, abs=1e-12)


def test_distance_to_segment_interior_foot(rng):
    for _ in range(30):
        a, b, p = rng.normal(size=(3, 2))
        got = point_set_distance(p, VertexPolytope([a, b]))
        assert got == pytest.approx(dense_segment_distance(p, a, b), abs=1e-5)


def test_distance_zero_on_vertices(rng):
    for _ in range(20):
        A = rng.normal(size=(3, 3))
        s = AffineImage(A, rng.normal(size=3), Box(-rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)))
        poly = VertexPolytope(vertices(s))
        for v in vertices(s):
            assert point_set_distance(v, s) <= 1e-9
            assert point_set_distance(v, poly) <= 1e-9


def test_affine_distance_matches_polytope(rng):
    for _ in range(20):
        A = rng.normal(size=(2, 2))
        s = AffineImage(A, rng.normal(size=2), Box([-1, 0], [1, 0.5]))
        p = 3 * rng.normal(size=2)
        assert point_set_distance(p, s) == pytest.approx(
            point_set_distance(p, VertexPolytope(vertices(s))), abs=1e-7)


def test_support_examples():
    assert support_value(Box([-1, -1], [1, 1]), [1, 1]) == 2.0
    assert support_value(Singleton([3, 4]), [0, 1]) == 4.0
    assert support_value(VertexPolytope([[0, 0], [2, 1]]), [1, -1]) == 1.0


def test_support_equals_vertex_max(rng):
    for _ in range(50):
        n = int(rng.integers(1, 5))
        s = AffineImage(rng.normal(size=(n, n)), rng.normal(size=n),
                        Box(-rng.uniform(0, 1, n), rng.uniform(0, 1, n)))
        d = rng.normal(size=n)
        assert support_value(s, d) == pytest.approx(float(np.max(vertices(s) @ d)), abs=1e-12)


def test_sup_norm():
    assert sup_norm(Box([-3, 0], [1, 4])) == 5.0
    assert sup_norm(Singleton([3, 4])) == 5.0


# Caratheodory maps ----------------------------------------------------------

def test_hopfield_inclusion_respects_growth(rng):
    sys_ = hopfield.build(hopfield.reference_spec())
    F = sys_.inclusion
    assert F.check_equilibrium([0.0, 1.0, 3.0])
    for _ in range(1000):
        t = rng.uniform(0, 5)
        x = rng.uniform(-1, 1, 2)
        env = F.growth(t) * (1 + np.linalg.norm(x))
        s = F(t, x)
        for e in np.eye(2):
            assert support_value(s, e) <= env + 1e-12
            assert -support_value(s, -e) >= -env - 1e-12
    # jumps at |x_i| = 0.5 produce genuine boxes
    assert vertices(F(0.0, np.array([0.5, 0.1]))).shape[0] == 2
