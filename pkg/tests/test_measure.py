import numpy as np
import pytest

from strongrhi.errors import DegenerateInputError, InputError
from strongrhi.measure import (
    AxisGrid,
    GridMeasure,
    GridRect,
    Rect,
    Weight,
    aligned_sums,
    average,
    box_sums,
    covered_fractions,
    cumulative,
    dual_weight,
    integral,
    level_mass,
    mass,
)

from conftest import random_pair


class TestAxisGrid:
    def test_uniform(self):
        g = AxisGrid.uniform([(0, 1), (0, 2)], [4, 2])
        assert g.shape == (4, 2) and g.ncells == 8 and g.dim == 2
        np.testing.assert_allclose(g.cell_volumes().sum(), 2.0)

    def test_rejects_nonincreasing(self):
        with pytest.raises(InputError, match="index 2"):
            AxisGrid((np.array([0.0, 0.5, 0.5, 1.0]),))

    def test_rejects_too_many_cells(self):
        with pytest.raises(InputError, match="limit"):
            AxisGrid.uniform([(0, 1)], [20], max_cells=10)

    def test_refine(self):
        g = AxisGrid.uniform([(0, 1)], [3]).refine(2)
        np.testing.assert_allclose(g.breakpoints[0], np.linspace(0, 1, 7))

    def test_breakpoints_readonly(self):
        g = AxisGrid.uniform([(0, 1)], [2])
        with pytest.raises(ValueError):
            g.breakpoints[0][0] = 5.0


class TestRect:
    def test_rejects_empty_side(self):
        with pytest.raises(InputError):
            Rect([(0.5, 0.5)])
        assert Rect([(0.5, 0.5)], degenerate=True).dim == 1

    def test_intersect_and_split(self):
        a = Rect([(0, 1), (0, 1)])
        lo, hi = a.split(0, 0.25)
        assert lo.bounds == ((0.0, 0.25), (0.0, 1.0)) and hi.bounds == ((0.25, 1.0), (0.0, 1.0))
        assert a.intersect(Rect([(0.5, 2), (0.5, 2)])).bounds == ((0.5, 1.0), (0.5, 1.0))

    def test_grid_rect(self):
        g = AxisGrid.uniform([(0, 1)], [4])
        assert GridRect(((1, 3),)).to_rect(g).bounds == ((0.25, 0.75),)


class TestMeasure:
    def test_lebesgue_mass(self):
        g = AxisGrid.uniform([(0, 1), (0, 1)], [3, 5])
        mu = GridMeasure.lebesgue(g)
        assert mu.is_product
        assert mass(mu, Rect([(0.1, 0.4), (0.2, 0.9)])) == pytest.approx(0.3 * 0.7, abs=1e-15)

    def test_rejects_bad_masses(self):
        g = AxisGrid.uniform([(0, 1)], [2])
        with pytest.raises(InputError):
            GridMeasure(g, np.array([1.0, -1.0]))
        with pytest.raises(InputError):
            GridMeasure(g, np.array([1.0, 1.0, 1.0]))
        with pytest.raises(InputError):
            GridMeasure(g, np.zeros(2))

    def test_zero_mass_average(self):
        g = AxisGrid.uniform([(0, 1)], [2])
        mu = GridMeasure(g, np.array([0.0, 1.0]))
        w = Weight.constant(g)
        with pytest.raises(DegenerateInputError):
            average(w, mu, Rect([(0.0, 0.5)]))

    def test_refine_preserves_masses(self):
        rng = np.random.default_rng(0)
        w, mu = random_pair(rng, (3, 2))
        r = Rect([(0.13, 0.71), (0.2, 0.95)])
        fine = mu.refine(3)
        assert mass(fine, r) == pytest.approx(mass(mu, r), rel=1e-13)
        assert integral(w.refine(3), fine, r) == pytest.approx(integral(w, mu, r), rel=1e-13)


class TestQuadrature:
    def test_partial_cells(self):
        g = AxisGrid.uniform([(0, 1)], [4])
        mu = GridMeasure.lebesgue(g)
        w = Weight(g, np.array([1.0, 1.0, 1.0, 2.0]))
        assert integral(w, mu, Rect([(0.6, 0.9)])) == pytest.approx(0.15 * 1 + 0.15 * 2, abs=1e-15)
        assert average(w, mu, Rect([(0, 1)])) == pytest.approx(1.25, abs=1e-15)

    def test_box_sums_match_covered_fractions(self):
        rng = np.random.default_rng(1)
        w, mu = random_pair(rng, (4, 3))
        tab = np.stack([cumulative(w.values * mu.masses), cumulative(mu.masses)])
        lo = rng.uniform(0, 0.5, (20, 2))
        hi = lo + rng.uniform(0.01, 0.5, (20, 2))
        got = box_sums(tab, mu.grid, lo, hi)
        for k in range(20):
            frac = covered_fractions(mu.grid, Rect(list(zip(lo[k], hi[k])))) * mu.masses
            np.testing.assert_allclose(got[:, k], [np.sum(frac * w.values), np.sum(frac)], rtol=1e-12)

    def test_aligned_sums(self):
        rng = np.random.default_rng(2)
        vals = rng.uniform(size=(3, 4))
        tab = cumulative(vals)[None]
        s = aligned_sums(tab, np.array([[1, 0]]), np.array([[3, 2]]))
        assert s[0, 0] == pytest.approx(vals[1:3, 0:2].sum(), rel=1e-14)

    def test_level_mass(self):
        g = AxisGrid.uniform([(0, 1)], [4])
        mu = GridMeasure.lebesgue(g)
        w = Weight(g, np.array([1.0, 3.0, 1.0, 2.0]))
        assert level_mass(w, mu, Rect([(0, 1)]), 1.5) == pytest.approx(0.5)
        assert level_mass(w, mu, Rect([(0, 1)]), 2.0, strict=False) == pytest.approx(0.5)
        assert level_mass(w, mu, Rect([(0, 1)]), 1.5, weighted=True) == pytest.approx(1.25)


class TestWeight:
    def test_rejects_nonpositive(self):
        g = AxisGrid.uniform([(0, 1)], [2])
        with pytest.raises(InputError):
            Weight(g, np.array([1.0, 0.0]))

    def test_dual_weight(self):
        g = AxisGrid.uniform([(0, 1)], [2])
        w = Weight(g, np.array([1.0, 4.0]))
        np.testing.assert_allclose(dual_weight(w, 2.0).values, [1.0, 0.25])
        np.testing.assert_allclose(dual_weight(w, 3.0).values, [1.0, 0.5])
        with pytest.raises(InputError):
            dual_weight(w, 1.0)

    def test_product(self):
        g = AxisGrid.uniform([(0, 1), (0, 1)], [2, 2])
        w = Weight.product(g, [np.array([1.0, 2.0]), np.array([3.0, 1.0])])
        assert w.is_product
        np.testing.assert_allclose(w.values, [[3, 1], [6, 2]])
