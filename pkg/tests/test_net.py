import numpy as np
import pytest

from geodesica.net import (Cell, GeodecityStatus, GeodesicNet, Intersection, NetError, Polyline3, Segment,
                           cell_contour, check_geodecity, estimate_frenet, normal_defect)


def circle3(n, plane="xy"):
    t = 2.0 * np.pi * np.arange(n) / n
    c, s, z = np.cos(t), np.sin(t), np.zeros(n)
    return {"xy": np.column_stack([c, s, z]), "xz": np.column_stack([c, z, s])}[plane]


def square_net(z=0.0):
    pts = np.array([[0, 0, z], [1, 0, z], [1, 1, z], [0, 1, z]], dtype=float)
    curve = Polyline3(pts, closed=True)
    return GeodesicNet((curve,), (), (Cell((Segment(0, 0.0, curve.length),), id="sq"),))


def test_polyline_rejects_repeated_points():
    with pytest.raises(NetError):
        Polyline3([[0, 0, 0], [0, 0, 0], [1, 0, 0]])


def test_closed_polyline_rejects_duplicated_endpoint():
    with pytest.raises(NetError):
        Polyline3([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 0]], closed=True)


def test_closed_arclength_includes_closing_edge():
    curve = square_net().curves[0]
    assert curve.length == pytest.approx(4.0)
    assert np.allclose(curve.evaluate(4.5), [0.5, 0, 0])


def test_frenet_straight_line_is_undefined():
    fr = estimate_frenet(Polyline3(np.column_stack([np.linspace(0, 1, 11), np.zeros(11), np.zeros(11)])), 0.5)
    assert fr.curvature == pytest.approx(0.0, abs=1e-12)
    assert fr.normal is None


def test_frenet_unit_circle():
    fr = estimate_frenet(Polyline3(circle3(360), closed=True), 0.0)
    assert fr.curvature == pytest.approx(1.0, abs=1e-3)
    assert np.allclose(fr.normal, [-1, 0, 0], atol=1e-3)


def test_frenet_helix_curvature():
    # (cos t, sin t, t)/sqrt 2 has radius and pitch 1/sqrt 2, curvature a/(a^2+b^2) = 1/sqrt 2
    t = np.linspace(0, 4 * np.pi, 4001)
    helix = Polyline3(np.column_stack([np.cos(t), np.sin(t), t]) / np.sqrt(2))
    fr = estimate_frenet(helix, helix.length / 2)
    assert fr.curvature == pytest.approx(1 / np.sqrt(2), rel=1e-4)


def test_geodecity_great_circles_pass():
    a, b = Polyline3(circle3(400, "xy"), closed=True), Polyline3(circle3(400, "xz"), closed=True)
    net = GeodesicNet((a, b), (Intersection(0, 1, 0.0, 0.0, (1.0, 0.0, 0.0)),))
    (entry,) = check_geodecity(net, 0.1)
    assert entry.status is GeodecityStatus.PASS
    assert entry.angle_defect < 1e-3


def test_geodecity_straight_lines_degenerate():
    s = np.linspace(-1, 1, 21)
    z = np.zeros_like(s)
    net = GeodesicNet((Polyline3(np.column_stack([s, z, z])), Polyline3(np.column_stack([z, s, z]))),
                      (Intersection(0, 1, 1.0, 1.0, (0.0, 0.0, 0.0)),))
    assert check_geodecity(net)[0].status is GeodecityStatus.DEGENERATE


def test_geodecity_perpendicular_normals_fail():
    # unit circle in xy and a unit circle in the plane x = 1 centred at (1, 0, 1), both through (1, 0, 0)
    t = 2.0 * np.pi * np.arange(400) / 400
    other = np.column_stack([np.ones_like(t), np.sin(t), 1 - np.cos(t)])
    net = GeodesicNet((Polyline3(circle3(400), closed=True), Polyline3(other, closed=True)),
                      (Intersection(0, 1, 0.0, 0.0, (1.0, 0.0, 0.0)),))
    (entry,) = check_geodecity(net, 0.5)
    assert entry.status is GeodecityStatus.FAIL
    assert entry.angle_defect == pytest.approx(np.pi / 2, abs=1e-3)


def test_normal_defect_ignores_sign():
    n = np.array([0.0, 0.0, 1.0])
    assert normal_defect(n, -n) == 0.0


def test_validate_rejects_missing_curve():
    net = square_net()
    bad = GeodesicNet(net.curves, (), (Cell((Segment(3, 0.0, 1.0),), id="x"),))
    with pytest.raises(NetError, match="3"):
        bad.validate()


def test_validate_rejects_bad_intersection():
    net = square_net()
    bad = GeodesicNet(net.curves, (Intersection(0, 0, 0.0, 1.0, (0.0, 0.0, 0.0)),), net.cells)
    with pytest.raises(NetError):
        bad.validate()


def test_cell_contour_of_square():
    net = square_net()
    pts, corners = cell_contour(net.cells[0], net)
    assert len(pts) == 4
    assert corners == []  # corners are segment junctions; one closed segment has none


def test_cell_segments_must_meet():
    a = Polyline3([[0, 0, 0], [1, 0, 0]])
    b = Polyline3([[1, 1, 0], [0, 1, 0], [0, 0.5, 0]])
    net = GeodesicNet((a, b), (), (Cell((Segment(0, 0.0, 1.0), Segment(1, 0.0, b.length))),))
    with pytest.raises(NetError):
        net.validate()
