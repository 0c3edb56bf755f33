import numpy as np
import pytest

from geodesica.profiles import Profile, ProfileError, folded_squares_net, profile_contour, profile_net

T = np.linspace(0, 2 * np.pi, 97)


@pytest.mark.parametrize("src, ref", [
    ("sin(4t)", lambda t: np.sin(4 * t)),
    ("sin(2t)", lambda t: np.sin(2 * t)),
    ("sin(4t) - 2cos^2(t)", lambda t: np.sin(4 * t) - 2 * np.cos(t) ** 2),
    ("2 t sin(t)", lambda t: 2 * t * np.sin(t)),
    ("-t^2/4 + exp(-t)", lambda t: -t**2 / 4 + np.exp(-t)),
    ("pi*cos(t)^3", lambda t: np.pi * np.cos(t) ** 3),
    ("sqrt(1 + .5e1*t)", lambda t: np.sqrt(1 + 5 * t)),
])
def test_values(src, ref):
    assert np.allclose(Profile(src)(T), ref(T), rtol=0, atol=1e-14)


def test_derivative_is_exact():
    p = Profile("sin(4t) - 2cos^2(t)")
    assert np.allclose(p.derivative(T), 4 * np.cos(4 * T) + 4 * np.cos(T) * np.sin(T), atol=1e-13)


@pytest.mark.parametrize("bad", ["sin(", "foo(t)", "t +", "2 $ t", ")"])
def test_errors(bad):
    with pytest.raises(ProfileError):
        Profile(bad)


def test_contour_on_unit_circle():
    pts = profile_contour("sin(2t)", 64)
    assert pts.shape == (64, 3)
    assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), 1.0)


def test_profile_net_is_valid():
    net = profile_net("sin(4t)", 128)
    net.validate()
    assert len(net.cells) == 1 and net.curves[0].closed


def test_folded_squares_share_an_edge():
    net = folded_squares_net(np.pi / 2)
    assert {s.curve for s in net.cells[0].segments} & {s.curve for s in net.cells[1].segments} == {0}
    assert np.allclose(net.curves[2].points[-2], [1, 0, 1 / 16])
