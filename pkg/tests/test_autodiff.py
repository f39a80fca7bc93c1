import math
import random

import numpy as np
import pytest

from polyloss.autodiff import Dual, cos, finite_diff_check, grad_of, hypot, sin, sqrt
from polyloss.codes import CARTESIAN, VertexCode
from polyloss.geometry import Point2


def test_dual_arithmetic_rules():
    x = Dual(3.0, 1.0)
    y = Dual(2.0, 0.0)
    assert (x + y).a == 5.0 and (x + y).b == 1.0
    assert (x * y).a == 6.0 and (x * y).b == 2.0
    assert (x - y).b == 1.0
    q = x / y
    assert q.a == 1.5 and q.b == pytest.approx(0.5)


def test_dual_mixed_with_floats():
    x = Dual(4.0, 1.0)
    assert (2.0 + x).a == 6.0
    assert (2.0 * x).b == 2.0
    assert (1.0 - x).b == -1.0
    r = 8.0 / x
    assert r.a == 2.0 and r.b == pytest.approx(-0.5)


def test_dual_square_derivative():
    x = Dual(1.0, 1.0)
    assert (x * x).b == pytest.approx(2.0)


def test_dual_quotient_rule_random():
    rng = random.Random(2)
    for _ in range(100):
        a, b = rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0)
        x = Dual(a, 1.0)
        y = Dual(b, 0.0)
        got = (x / y).b
        assert got == pytest.approx(1.0 / b, rel=1e-12)


def test_dual_abs_and_comparisons():
    assert abs(Dual(-3.0, 1.0)).b == -1.0
    assert abs(Dual(3.0, 1.0)).b == 1.0
    assert abs(Dual(0.0, 1.0)).b == 0.0
    assert Dual(1.0, 5.0) < Dual(2.0, -5.0)
    assert Dual(2.0, 0.0) > 1.5
    assert (Dual(2.0, 0.0) <= 2.0) is True


def test_dual_trig_chain_rule():
    x = Dual(0.7, 1.0)
    assert sin(x).b == pytest.approx(math.cos(0.7))
    assert cos(x).b == pytest.approx(-math.sin(0.7))
    assert sqrt(Dual(4.0, 1.0)).b == pytest.approx(0.25)
    assert hypot(Dual(3.0, 1.0), Dual(4.0, 0.0)).b == pytest.approx(0.6)


def signed_area_of(coords):
    # absolute-coordinate shoelace over center (1/3, 1/3) cartesian offsets
    n = len(coords) // 2
    cx, cy = 1.0 / 3.0, 1.0 / 3.0
    total = 0.0
    for i in range(n):
        j = (i + 1) % n
        xi, yi = coords[2 * i] + cx, coords[2 * i + 1] + cy
        xj, yj = coords[2 * j] + cx, coords[2 * j + 1] + cy
        total = total + (xi * yj - xj * yi)
    return total * 0.5


def test_grad_of_shoelace_matches_analytic():
    # triangle (0,0),(1,0),(0,1) about its centroid: dA/dx2 = 0.5*(y3-y1) = 0.5
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    offsets = []
    for x, y in tri:
        offsets += [x - 1.0 / 3.0, y - 1.0 / 3.0]
    code = VertexCode(Point2(1.0 / 3.0, 1.0 / 3.0), offsets, CARTESIAN)
    report = grad_of(signed_area_of, code)
    assert report.value == pytest.approx(0.5)
    assert report.grad[2] == pytest.approx(0.5)  # x of vertex 2
    # full analytic gradient: dA/dxi = 0.5*(y_{i+1} - y_{i-1}), dA/dyi = 0.5*(x_{i-1} - x_{i+1})
    expected = [0.5 * (0.0 - 1.0), 0.5 * (0.0 - 1.0),
                0.5 * (1.0 - 0.0), 0.5 * (0.0 - 0.0),
                0.5 * (0.0 - 0.0), 0.5 * (1.0 - 0.0)]
    assert np.allclose(report.grad, expected, atol=1e-12)


def test_grad_of_constant_is_zero():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 0.0, 0.0, 1.0, -1.0, 0.0], CARTESIAN)
    report = grad_of(lambda xs: 7.25, code)
    assert report.value == 7.25
    assert (report.grad == 0.0).all()


def test_grad_of_square_seeded_at_one():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 0.0, 0.0, 1.0, -1.0, 0.0], CARTESIAN)
    report = grad_of(lambda xs: xs[0] * xs[0], code)
    assert report.grad[0] == pytest.approx(2.0)
    assert (report.grad[1:] == 0.0).all()


def test_grad_of_is_deterministic():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 0.2, -0.4, 1.1, -1.0, -0.7], CARTESIAN)

    def f(xs):
        total = xs[0]
        for v in xs[1:]:
            total = total * v + abs(v)
        return total

    r1 = grad_of(f, code)
    r2 = grad_of(f, code)
    assert r1.value == r2.value
    assert (r1.grad == r2.grad).all()


def test_finite_diff_check_smooth_function():
    code = VertexCode(Point2(0.0, 0.0), [0.9, 0.1, -0.3, 1.2, -1.1, -0.4], CARTESIAN)

    def f(xs):
        total = 0.0
        for i, v in enumerate(xs):
            total = total + sin(v) * (i + 1) + v * v
        return total

    report = finite_diff_check(f, code, h=1e-6, rtol=1e-6)
    assert report.n_flagged == 0
    assert report.passed
    assert report.max_rel_err <= 1e-6


def test_finite_diff_check_flags_topology_change():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 0.0, 0.0, 1.0, -1.0, 0.0], CARTESIAN)

    class Step:
        # branch flips exactly at xs[0] = 1.0, inside the probe interval
        def __call__(self, xs):
            base = xs[1] * 2.0
            bumped = base + 100.0 if float(xs[0]) >= 1.0 else base
            return bumped

        def signature(self, xs):
            return float(xs[0]) >= 1.0

    report = finite_diff_check(Step(), code, h=1e-3, rtol=1e-4)
    assert bool(report.flagged[0]) is True
    assert not report.flagged[1:].any()
    assert report.passed  # flagged coordinate excluded from the verdict


def test_finite_diff_check_rejects_bad_h():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 0.0, 0.0, 1.0, -1.0, 0.0], CARTESIAN)
    with pytest.raises(ValueError):
        finite_diff_check(lambda xs: xs[0], code, h=0.0)


def test_grad_of_uses_frozen_structure():
    code = VertexCode(Point2(0.0, 0.0), [2.0, 0.0, 0.0, 2.0, -2.0, 0.0], CARTESIAN)

    class Frozen:
        # the active branch is chosen at freeze time and reused by dual passes
        def __init__(self):
            self.branch = None

        def freeze(self, xs):
            self.branch = xs[0] > 1.0

        def __call__(self, xs):
            return xs[0] * 3.0 if xs[0] > 1.0 else xs[0] * 5.0

        def dual(self, xs):
            return xs[0] * 3.0 if self.branch else xs[0] * 5.0

    f = Frozen()
    report = grad_of(f, code)
    assert f.branch is True
    assert report.grad[0] == pytest.approx(3.0)
