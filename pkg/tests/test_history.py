"""History segment interpolation tests."""

import numpy as np
import pytest

from nfkit.errors import DomainError
from nfkit.history import HistoryRing, HistorySegment


def test_constant_history_is_exact():
    seg = HistorySegment.constant(np.array([2.0, -1.0]), -1.0, 0.0)
    for t in np.linspace(-1, 0, 17):
        np.testing.assert_allclose(seg(t), [2.0, -1.0], rtol=0, atol=1e-15)


def test_cubic_is_reproduced_exactly():
    # Hermite interpolation with exact derivatives is exact on cubics
    ts = np.linspace(0.0, 2.0, 9)
    poly = lambda t: 1.0 + t - 0.5 * t**2 + 0.25 * t**3
    dpoly = lambda t: 1.0 - t + 0.75 * t**2
    seg = HistorySegment(ts, poly(ts)[:, None], dpoly(ts)[:, None])
    for t in np.linspace(0, 2, 41):
        assert seg(t)[0] == pytest.approx(poly(t), abs=1e-13)


def test_quartic_error_order():
    # interpolation error on a smooth function drops ~16x per halving
    f = np.sin
    df = np.cos
    errs = []
    for n in (8, 16, 32):
        ts = np.linspace(0, 3, n + 1)
        seg = HistorySegment(ts, f(ts)[:, None], df(ts)[:, None])
        q = np.linspace(0.01, 2.99, 301)
        errs.append(max(abs(seg(t)[0] - f(t)) for t in q))
    assert errs[0] / errs[1] > 10
    assert errs[1] / errs[2] > 10


def test_out_of_window_queries_error():
    seg = HistorySegment.constant(np.zeros(1), -1.0, 0.0)
    with pytest.raises(DomainError):
        seg(-1.5)
    with pytest.raises(DomainError):
        seg(0.5)


def test_validation():
    with pytest.raises(DomainError):
        HistorySegment([0.0, 0.0], np.zeros((2, 1)))
    with pytest.raises(DomainError):
        HistorySegment([0.0], np.zeros((1, 1)))
    with pytest.raises(DomainError):
        HistorySegment([0.0, 1.0], np.zeros((3, 1)))


def test_ring_matches_segment_on_knots_and_midpoints():
    init = HistorySegment.constant(np.array([1.0]), -0.5, 0.0)
    dt = 0.1
    ring = HistoryRing(init, dt, tau_max=0.5, state_dim=1)
    f = lambda t: np.array([np.exp(-t)])
    d = lambda t: np.array([-np.exp(-t)])
    for i in range(8):
        ring.append(i * dt, f(i * dt), d(i * dt))
    # knots exact
    for i in range(8):
        np.testing.assert_allclose(ring.eval(i * dt), f(i * dt), atol=0)
    # interior points 4th-order accurate (~h^4/384 with h=0.1)
    for t in (0.05, 0.31, 0.62):
        assert ring.eval(t)[0] == pytest.approx(np.exp(-t), abs=1e-6)
    # pre-zero queries hit the initial segment
    np.testing.assert_allclose(ring.eval(-0.3), [1.0])
