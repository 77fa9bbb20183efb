import numpy as np
import pytest

from strongrhi.constants import (
    a1_star_constant,
    ainf_exp_constant,
    ainf_fw_constant,
    ap_star_constant,
    constant_by_name,
    doubling_constant,
    fw_inner_bounds,
)
from strongrhi.errors import InputError
from strongrhi.measure import AxisGrid, GridMeasure, Rect, Weight
from strongrhi.search import initial_boxes

from conftest import random_pair, w0_pair
from oracles import brute_a1, brute_ainf_exp, brute_ap


class TestApStar:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_w0_against_oracle(self, p):
        w, mu = w0_pair()
        c = ap_star_constant(w, mu, p, tol=1e-8)
        brute = brute_ap(w, mu, p, points=401)
        assert c.lower <= c.upper
        assert brute <= c.upper * (1 + 1e-9)
        assert c.lower >= brute * (1 - 1e-6)

    def test_w0_closed_form(self, w0):
        # the worst interval is [1/2, 1]: avg w = 3/2, avg 1/w = 3/4
        c = ap_star_constant(*w0, 2.0, tol=1e-9)
        assert c.lower == pytest.approx(1.125, abs=1e-9)
        assert c.upper - c.lower <= 1e-9

    @pytest.mark.parametrize("seed", range(6))
    def test_2d_against_oracle(self, seed):
        rng = np.random.default_rng(seed)
        w, mu = random_pair(rng, (2, 3))
        p = [1.5, 2.0, 3.0][seed % 3]
        c = ap_star_constant(w, mu, p, tol=1e-6)
        brute = brute_ap(w, mu, p, points=41)
        assert brute <= c.upper * (1 + 1e-9)
        assert c.gap <= 1e-6 * c.upper + 1e-12

    def test_constant_weight(self):
        g = AxisGrid.uniform([(0, 1), (0, 1)], [3, 2])
        c = ap_star_constant(Weight.constant(g, 7.0), GridMeasure.lebesgue(g), 2.0)
        assert c.lower == pytest.approx(1.0, abs=1e-12) and c.upper == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        w, mu = random_pair(rng, (5,))
        a = ap_star_constant(w, mu, 2.0, tol=1e-8)
        b = ap_star_constant(Weight(w.grid, 3.5 * w.values), mu, 2.0, tol=1e-8)
        assert a.lower == pytest.approx(b.lower, rel=1e-7)

    def test_refinement_invariance(self):
        rng = np.random.default_rng(4)
        w, mu = random_pair(rng, (3, 2))
        a = ap_star_constant(w, mu, 2.0, tol=1e-7)
        b = ap_star_constant(w.refine(2), mu.refine(2), 2.0, tol=1e-7)
        assert a.lower <= b.upper * (1 + 1e-12) and b.lower <= a.upper * (1 + 1e-12)

    def test_rejects_bad_input(self, w0):
        w, mu = w0
        with pytest.raises(InputError):
            ap_star_constant(w, mu, 1.0)
        with pytest.raises(InputError):
            ap_star_constant(w, mu, 2.0, tol=0.0)
        other = GridMeasure.lebesgue(AxisGrid.uniform([(0, 1)], [5]))
        with pytest.raises(InputError):
            ap_star_constant(w, other, 2.0)


class TestA1Star:
    def test_w0_limit(self, w0):
        c = a1_star_constant(*w0)
        assert c.lower == pytest.approx(2.0, abs=1e-9)
        assert not c.attained
        assert c.limit_faces[0]["approaches"] == pytest.approx(0.75)

    def test_constant_weight(self):
        g = AxisGrid.uniform([(0, 1)], [3])
        c = a1_star_constant(Weight.constant(g), GridMeasure.lebesgue(g))
        assert c.lower == 1.0 and c.upper == 1.0

    @pytest.mark.parametrize("seed", range(4))
    def test_oracle_and_ap_bound(self, seed):
        rng = np.random.default_rng(10 + seed)
        shape = (4,) if seed % 2 == 0 else (2, 2)
        w, mu = random_pair(rng, shape)
        c = a1_star_constant(w, mu)
        brute = brute_a1(w, mu, points=81 if len(shape) == 1 else 17)
        assert brute <= c.upper * (1 + 1e-9)
        # A_p <= A_1 for every p
        for p in (1.5, 3.0):
            assert ap_star_constant(w, mu, p, tol=1e-6).lower <= c.upper * (1 + 1e-9)


class TestAinfExp:
    def test_w0_against_oracle(self, w0):
        c = ainf_exp_constant(*w0, tol=1e-8)
        brute = brute_ainf_exp(*w0, points=2001)
        assert brute <= c.upper * (1 + 1e-12)
        assert c.lower >= brute * (1 - 1e-6)

    @pytest.mark.parametrize("seed", range(3))
    def test_below_ap(self, seed):
        # Jensen: exp(-avg log w) <= avg(w^(1-p'))^(p-1)
        rng = np.random.default_rng(20 + seed)
        w, mu = random_pair(rng, (3, 3))
        e = ainf_exp_constant(w, mu, tol=1e-6)
        assert 1.0 <= e.lower <= e.upper
        assert e.lower <= ap_star_constant(w, mu, 1.5, tol=1e-6).upper * (1 + 1e-9)
        assert brute_ainf_exp(w, mu, points=25) <= e.upper * (1 + 1e-9)


class TestFujiiWilson:
    def test_constant_weight_is_one(self):
        g = AxisGrid.uniform([(0, 1)], [4])
        c = ainf_fw_constant(Weight.constant(g, 2.0), GridMeasure.lebesgue(g))
        assert c.lower == pytest.approx(1.0) and c.upper == pytest.approx(1.0)

    def test_w0_enclosure(self, w0):
        w, mu = w0
        c = ainf_fw_constant(w, mu, tol=0.05)
        assert 1.0 <= c.lower <= c.upper
        li, ui, wr = fw_inner_bounds(w, mu, Rect([(0.5, 1.0)]), 6)
        assert li <= ui and wr == pytest.approx(0.75)
        assert li / wr <= c.upper * (1 + 1e-12)

    def test_inner_bounds_tighten(self, w0):
        w, mu = w0
        r = Rect([(0.0, 1.0)])
        prev = (0.0, np.inf)
        for depth in range(0, 6):
            li, ui, _ = fw_inner_bounds(w, mu, r, depth)
            assert li <= ui
            assert li >= prev[0] - 1e-12 and ui <= prev[1] + 1e-12
            prev = (li, ui)

    def test_budget_fallback(self):
        rng = np.random.default_rng(7)
        w, mu = random_pair(rng, (6, 6))
        n = len(initial_boxes(mu.grid))
        c = ainf_fw_constant(w, mu, budget=n // 2)
        assert 1.0 <= c.lower <= c.upper


class TestDoubling:
    def test_lebesgue(self):
        g1 = AxisGrid.uniform([(0, 1)], [4])
        assert doubling_constant(GridMeasure.lebesgue(g1)).lower == pytest.approx(2.0)
        g2 = AxisGrid.uniform([(0, 1), (0, 1)], [2, 2])
        assert doubling_constant(GridMeasure.lebesgue(g2)).lower == pytest.approx(4.0)

    def test_hand_value(self):
        # density (1,1,1,8): I = [7/12, 3/4] has mass 1/6, 2I = [1/2, 5/6] has mass 11/12
        g = AxisGrid.uniform([(0, 1)], [4])
        c = doubling_constant(GridMeasure(g, np.array([1.0, 1.0, 1.0, 8.0]) / 4))
        assert c.lower == pytest.approx(5.5, rel=1e-12)
        assert c.upper == pytest.approx(5.5, rel=1e-12)


class TestDispatch:
    def test_by_name(self, w0):
        w, mu = w0
        assert constant_by_name("ap", w, mu, p=2.0).lower == pytest.approx(1.125, abs=1e-6)
        assert constant_by_name("a1", w, mu).lower == pytest.approx(2.0)
        with pytest.raises(InputError):
            constant_by_name("bogus", w, mu)

    def test_to_dict(self, w0):
        d = ap_star_constant(*w0, 2.0).to_dict()
        assert d["witness"] == [[0.5, 1.0]] or np.allclose(d["witness"], [[0.5, 1.0]], atol=1e-6)
        assert d["attained"] is True and isinstance(d["converged"], bool)
