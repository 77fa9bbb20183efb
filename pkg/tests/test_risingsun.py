import numpy as np
import pytest

from strongrhi.errors import InputError, PreconditionError
from strongrhi.maximal import build_dyadic
from strongrhi.measure import AxisGrid, GridMeasure, Rect, Weight, average, integral, mass
from strongrhi.risingsun import dyadic_level_selection, rising_sun_1d, rising_sun_nd

from conftest import random_pair, w0_pair

UNIT = Rect([(0.0, 1.0)])


class TestRisingSun1D:
    @pytest.mark.parametrize(
        "lam, expected, residual",
        [
            (1.25, [(0.0, 1.0)], 0.0),
            (1.3, [(1.0 / 6.0, 1.0)], 1.0),
            (1.5, [(0.5, 1.0)], 1.0),
            (2.0, [], 2.0),
            (3.0, [], 2.0),
        ],
    )
    def test_w0_levels(self, lam, expected, residual):
        w, mu = w0_pair()
        d = rising_sun_1d(w, mu, UNIT, lam)
        assert len(d.rects) == len(expected)
        for r, (a, b) in zip(d.rects, expected):
            np.testing.assert_allclose(r.bounds[0], (a, b), atol=1e-12)
        assert all(abs(a - lam) <= 1e-12 for a in d.averages)
        assert d.residual == residual

    def test_subinterval(self):
        w, mu = w0_pair()
        d = rising_sun_1d(w, mu, Rect([(0.25, 0.9)]), 1.3)
        for r, a in zip(d.rects, d.averages):
            assert 0.25 <= r.bounds[0][0] and r.bounds[0][1] <= 0.9
            assert a == pytest.approx(1.3, rel=1e-12)

    def test_two_components(self):
        g = AxisGrid.uniform([(0, 1)], [5])
        mu = GridMeasure.lebesgue(g)
        w = Weight(g, np.array([3.0, 1.0, 1.0, 1.0, 3.0]))
        d = rising_sun_1d(w, mu, UNIT, 2.0)
        assert len(d.rects) == 2
        np.testing.assert_allclose([r.bounds[0] for r in d.rects], [(0.0, 0.4), (0.6, 1.0)], atol=1e-12)

    def test_precondition(self):
        w, mu = w0_pair()
        with pytest.raises(PreconditionError):
            rising_sun_1d(w, mu, UNIT, 1.0)
        with pytest.raises(InputError):
            rising_sun_1d(w, mu, Rect([(0.5, 1.5)]), 3.0)

    def test_rejects_2d(self):
        g = AxisGrid.uniform([(0, 1), (0, 1)], [2, 2])
        with pytest.raises(InputError):
            rising_sun_1d(Weight.constant(g), GridMeasure.lebesgue(g), g.domain_rect(), 2.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_shadow_points(self, seed):
        # outside the selection every interval starting at x has average <= lam
        rng = np.random.default_rng(seed)
        w, mu = random_pair(rng, (10,))
        avg = average(w, mu, UNIT)
        lam = 0.5 * (avg + w.values.max())
        d = rising_sun_1d(w, mu, UNIT, lam)
        covered = lambda x: any(r.bounds[0][0] < x < r.bounds[0][1] for r in d.rects)
        for x in rng.uniform(0, 1, 200):
            if covered(x):
                continue
            for y in np.linspace(x, 1.0, 25)[1:]:
                assert average(w, mu, Rect([(x, y)])) <= lam * (1 + 1e-9)


class TestRisingSunND:
    def test_w0_as_nd(self):
        w, mu = w0_pair()
        d = rising_sun_nd(w, mu, UNIT, 1.5)
        assert d.residual <= 1.5
        assert all(a == pytest.approx(1.5, rel=1e-10) for a in d.averages)

    def test_hot_corner(self):
        g = AxisGrid.uniform([(0, 1), (0, 1)], [2, 2])
        mu = GridMeasure.lebesgue(g)
        w = Weight(g, np.array([[1.0, 1.0], [1.0, 5.0]]))
        d = rising_sun_nd(w, mu, g.domain_rect(), 3.0)
        assert d.rects
        assert d.residual <= 3.0
        sel = sum(mass(mu, r) for r in d.rects)
        assert sum(integral(w, mu, r) for r in d.rects) == pytest.approx(3.0 * sel, rel=1e-12)

    def test_precondition(self):
        rng = np.random.default_rng(3)
        w, mu = random_pair(rng, (3, 3))
        R = mu.grid.domain_rect()
        with pytest.raises(PreconditionError):
            rising_sun_nd(w, mu, R, 0.5 * average(w, mu, R))


class TestDyadicSelection:
    def test_w0(self):
        w, mu = w0_pair()
        tree = build_dyadic(mu, UNIT, 3)
        s = dyadic_level_selection(w, mu, tree, 1.4)
        assert s.nodes == [(1, 1)]
        assert s.rects[0].bounds == ((0.5, 1.0),)
        assert s.averages == [1.5]

    def test_maximal_and_disjoint(self):
        rng = np.random.default_rng(4)
        w, mu = random_pair(rng, (4, 4))
        tree = build_dyadic(mu, mu.grid.domain_rect(), 3)
        lam = 1.1 * average(w, mu, mu.grid.domain_rect())
        s = dyadic_level_selection(w, mu, tree, lam)
        for a in s.averages:
            assert a > lam
        nodes = set(s.nodes)
        for level, i in s.nodes:
            # no selected ancestor
            for up in range(level - 1, -1, -1):
                i //= 4
                assert (up, i) not in nodes

    def test_rejects_nonpositive_level(self):
        w, mu = w0_pair()
        with pytest.raises(InputError):
            dyadic_level_selection(w, mu, build_dyadic(mu, UNIT, 1), 0.0)
