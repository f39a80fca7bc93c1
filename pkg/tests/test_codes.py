import math
import random

import numpy as np
import pytest

from polyloss.codes import (
    CARTESIAN,
    POLAR,
    VertexCode,
    angle_sort_permutation,
    decode,
    encode,
    normalize_polar,
    sort_by_angle,
)
from polyloss.errors import ShapeMismatch, WrongSystem
from polyloss.geometry import Point2, Polygon, area, is_simple


def test_decode_polar_single_known_vertex():
    code = VertexCode(Point2(0.0, 0.0), [math.sqrt(2.0), math.pi / 4.0] * 3, POLAR)
    xy = decode(code).xy
    assert xy[0] == pytest.approx((1.0, 1.0), abs=1e-12)


def test_decode_cartesian_square():
    offsets = [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0]
    code = VertexCode(Point2(10.0, 20.0), offsets, CARTESIAN)
    expected = [[9.0, 19.0], [11.0, 19.0], [11.0, 21.0], [9.0, 21.0]]
    assert decode(code).xy.tolist() == expected


def test_decode_polar_zero_radius_hits_center():
    for theta in (0.0, 1.3, 5.0):
        code = VertexCode(Point2(3.0, 4.0), [0.0, theta, 1.0, 0.0, 1.0, math.pi / 2], POLAR)
        assert decode(code).xy[0].tolist() == [3.0, 4.0]


def test_encode_cartesian_square():
    square = Polygon([(9.0, 19.0), (11.0, 19.0), (11.0, 21.0), (9.0, 21.0)])
    code = encode(square, Point2(10.0, 20.0), CARTESIAN)
    assert code.coords.tolist() == [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0]


def test_encode_polar_diagonal_vertex():
    tri = Polygon([(1.0, 1.0), (2.0, 0.0), (0.0, 2.0)])
    code = encode(tri, Point2(0.0, 0.0), POLAR)
    assert code.coords[0] == pytest.approx(math.sqrt(2.0))
    assert code.coords[1] == pytest.approx(math.pi / 4.0)


def test_encode_center_on_vertex_uses_zero_angle():
    tri = Polygon([(5.0, 5.0), (6.0, 5.0), (5.0, 6.0)])
    code = encode(tri, Point2(5.0, 5.0), POLAR)
    assert code.coords[0] == 0.0
    assert code.coords[1] == 0.0


def random_simple_polygon(rng, n=None):
    n = n or rng.randrange(3, 17)
    angles = []
    while len(angles) < n:
        angles = sorted(rng.uniform(0.0, 2.0 * math.pi) for _ in range(n))
        if min(b - a for a, b in zip(angles, angles[1:])) < 1e-2:
            angles = []
    cx, cy = rng.uniform(-50, 50), rng.uniform(-50, 50)
    pts = [(cx + r * math.cos(a), cy + r * math.sin(a))
           for a, r in ((a, rng.uniform(0.5, 10.0)) for a in angles)]
    return Polygon(pts), Point2(cx, cy)


def test_roundtrip_both_systems_100_random_polygons():
    rng = random.Random(42)
    for _ in range(100):
        p, c = random_simple_polygon(rng)
        for system in (CARTESIAN, POLAR):
            back = decode(encode(p, c, system))
            err = np.abs(back.xy - p.xy).max()
            assert err <= 1e-9


def test_encode_preserves_area():
    rng = random.Random(43)
    for _ in range(60):
        p, c = random_simple_polygon(rng)
        for system in (CARTESIAN, POLAR):
            assert area(decode(encode(p, c, system))) == pytest.approx(area(p), rel=1e-9)


def test_normalize_polar_folds_negative_radius():
    code = VertexCode(Point2(0.0, 0.0), [-2.0, 0.0, 1.0, 1.0, 1.0, 2.0], POLAR)
    norm = normalize_polar(code)
    assert norm.coords[0] == pytest.approx(2.0)
    assert norm.coords[1] == pytest.approx(math.pi)
    # decoded geometry is unchanged by normalization
    assert np.allclose(decode(norm).xy, decode(code).xy, atol=1e-12)


def test_normalize_polar_wraps_angle_range():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 7.0, 1.0, -1.0, 1.0, 0.5], POLAR)
    norm = normalize_polar(code)
    th = norm.pairs()[:, 1]
    assert ((0.0 <= th) & (th < 2.0 * math.pi)).all()
    assert np.allclose(decode(norm).xy, decode(code).xy, atol=1e-12)


def test_sort_by_angle_fixes_bowtie():
    bowtie = [-1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0]
    code = VertexCode(Point2(0.0, 0.0), bowtie, CARTESIAN)
    assert is_simple(decode(code)) is False
    sorted_code = sort_by_angle(code)
    ring = decode(sorted_code)
    assert is_simple(ring) is True
    assert area(ring) == pytest.approx(4.0)


def test_sort_by_angle_identity_on_sorted_input():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 0.1, 2.0, 1.0, 1.5, 2.5], POLAR)
    assert sort_by_angle(code).coords.tolist() == code.coords.tolist()


def test_sort_by_angle_tie_breaks_by_radius():
    code = VertexCode(Point2(0.0, 0.0), [2.0, 1.0, 1.0, 1.0, 1.0, 4.0], POLAR)
    out = sort_by_angle(code).pairs()
    assert out[0].tolist() == [1.0, 1.0]
    assert out[1].tolist() == [2.0, 1.0]


def test_sorted_codes_decode_simple():
    # center strictly inside the hull (angular gaps < pi), where simplicity
    # is guaranteed; angles fed in shuffled order
    rng = random.Random(44)
    for _ in range(100):
        n = rng.randrange(5, 17)
        sector = 2.0 * math.pi / n
        angles = [(k + rng.random()) * sector for k in range(n)]
        rng.shuffle(angles)
        coords = []
        for a in angles:
            coords += [rng.uniform(0.2, 5.0), a]
        code = VertexCode(Point2(0.0, 0.0), coords, POLAR)
        ring = decode(sort_by_angle(code))
        assert is_simple(ring) is True
        assert ring.signed_area() > 0.0  # clockwise on screen


def test_angle_sort_permutation_layout():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 2.0, 1.0, 1.0, 1.0, 3.0], POLAR)
    perm = angle_sort_permutation(code)
    assert perm.tolist() == [1, 0, 2]


def test_vertex_code_validates_shape():
    with pytest.raises(ShapeMismatch):
        VertexCode(Point2(0.0, 0.0), [1.0, 2.0, 3.0], CARTESIAN)
    with pytest.raises(ShapeMismatch):
        VertexCode(Point2(0.0, 0.0), [1.0, 2.0, 3.0, 4.0], CARTESIAN)


def test_vertex_code_validates_system():
    with pytest.raises(WrongSystem):
        VertexCode(Point2(0.0, 0.0), [0.0] * 6, "spherical")


def test_vertex_code_coords_read_only():
    code = VertexCode(Point2(0.0, 0.0), [1.0, 0.0, 0.0, 1.0, -1.0, 0.0], CARTESIAN)
    with pytest.raises(ValueError):
        code.coords[0] = 9.0
