import numpy as np
import pytest

from strongrhi.errors import InputError, PreconditionError
from strongrhi.measure import AxisGrid, GridMeasure, Rect, Weight
from strongrhi.theorems import (
    THEOREMS,
    Instance,
    applicable,
    empirical_rhi_range,
    exchange_terms,
    integrability_constant,
    level_terms,
    power_terms,
    rhi_terms,
    run_theorem,
    verify_open_property,
    verify_rhi_family,
    verify_weak_family,
)

from conftest import random_pair, w0_pair

UNIT = Rect([(0.0, 1.0)])


def unit_instance(cells=(4,), p=2.0):
    g = AxisGrid.uniform([(0, 1)] * len(cells), list(cells))
    return Instance(Weight.constant(g), GridMeasure.lebesgue(g), p)


class TestWorkedValues:
    def test_rhi_terms_w0(self):
        w, mu = w0_pair()
        lhs, rhs = rhi_terms(w, mu, UNIT, 1.0 / 18.0)
        assert lhs == pytest.approx((3 + 2 ** (19 / 18)) / 4, rel=1e-12)
        assert rhs == pytest.approx(2 * 1.25 ** (19 / 18), rel=1e-12)

    def test_power_terms_unit_weight(self):
        inst = unit_instance()
        assert power_terms(inst.w, inst.mu, UNIT, 1.7, 3.0) == pytest.approx((1.0, 3.0))

    def test_integrability_constant(self):
        assert integrability_constant(2.0, 1.5) == pytest.approx(3.0)
        with pytest.raises(PreconditionError):
            integrability_constant(2.0, 2.0)

    def test_level_and_exchange(self):
        w, mu = w0_pair()
        lhs, rhs = level_terms(w, mu, UNIT, 1.5, 2.0, 1.125)
        assert lhs == pytest.approx(0.5) and rhs == pytest.approx(3.0)
        lhs, rhs = exchange_terms(w, mu, UNIT, Rect([(0.75, 1.0)]), 2.0, 1.125)
        assert lhs == pytest.approx(0.0625) and rhs == pytest.approx(0.45)

    def test_dim_free_w0(self):
        w, mu = w0_pair()
        v = verify_rhi_family(Instance(w, mu, 2.0), "dim-free")
        assert v.status == "pass"
        assert v.epsilon == pytest.approx(1 / 18, abs=1e-9)
        assert v.provenance["sound"] is True and v.provenance["constant"] == "A_p*"


class TestStatusRules:
    def test_negative_slack_forces_fail(self):
        w, mu = w0_pair()
        v = verify_rhi_family(Instance(w, mu, 2.0), "dim-free", slack=-1.0)
        assert v.status == "fail" and v.failed

    def test_doubling_is_report_only(self):
        w, mu = w0_pair()
        v = run_theorem("rhi/doubling", Instance(w, mu, 2.0), slack=-1.0)
        assert v.status == "report-only" and not v.failed

    def test_mixed_norms_report_only(self):
        w, mu = w0_pair()
        assert run_theorem("mixed-norms", Instance(w, mu, 2.0)).status == "report-only"

    def test_maximal_norm_gated_by_product_structure(self):
        rng = np.random.default_rng(5)
        w, mu = random_pair(rng, (3, 3))
        v = verify_rhi_family(Instance(w, mu, 2.0, norm_budget=40), "maximal-norm")
        assert v.status == "report-only"
        w0, mu0 = w0_pair()
        assert verify_rhi_family(Instance(w0, mu0, 2.0), "maximal-norm").status == "pass"

    def test_unknown_ids(self):
        w, mu = w0_pair()
        inst = Instance(w, mu, 2.0)
        with pytest.raises(InputError):
            run_theorem("rhi/nope", inst)
        with pytest.raises(InputError):
            verify_weak_family(inst, "nope")

    def test_one_dimensional_only(self):
        rng = np.random.default_rng(6)
        w, mu = random_pair(rng, (2, 2))
        inst = Instance(w, mu, 2.0)
        assert not applicable("open/ainfty", inst) and not applicable("weak/weak-5", inst)
        with pytest.raises(PreconditionError):
            verify_open_property(inst, "ainfty")

    def test_applicable_at_p_one(self):
        w, mu = w0_pair()
        inst = Instance(w, mu, 1.0)
        assert applicable("integrability/a1-full", inst) and applicable("rhi/a1-remark", inst)
        assert not applicable("rhi/dim-free", inst)


class TestUnitWeight:
    @pytest.mark.parametrize("tid", sorted(THEOREMS))
    def test_every_theorem_passes(self, tid):
        inst = unit_instance()
        if not applicable(tid, inst):
            pytest.skip("not applicable")
        assert run_theorem(tid, inst).status in ("pass", "report-only")

    def test_open_property_unit(self):
        v = verify_open_property(unit_instance(), "ainfty")
        assert v.epsilon == pytest.approx(0.2)
        assert v.status == "pass"

    def test_empirical_range_capped(self):
        er = empirical_rhi_range(unit_instance())
        assert er.capped and er.passed


class TestEmpiricalRange:
    def test_w0(self):
        w, mu = w0_pair()
        er = empirical_rhi_range(Instance(w, mu, 2.0))
        assert er.passed
        assert er.candidates["dim-free"]["value"] == pytest.approx(1 / 18, abs=1e-9)
        assert er.epsilon >= max(c["value"] for c in er.candidates.values() if c["sound"])

    def test_two_cell_trend(self):
        # larger contrast shrinks the admissible range
        g = AxisGrid.uniform([(0, 1)], [2])
        mu = GridMeasure.lebesgue(g)
        eps = [empirical_rhi_range(Instance(Weight(g, np.array([1.0, B])), mu, 2.0)).epsilon for B in (4, 16, 64)]
        assert eps[0] > eps[1] > eps[2]
