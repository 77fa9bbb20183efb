import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from strongrhi.constants import ap_star_constant
from strongrhi.maximal import strong_maximal
from strongrhi.measure import AxisGrid, GridMeasure, Rect, Weight, average
from strongrhi.risingsun import rising_sun_1d
from strongrhi.specfile import parse_spec, serialize_spec, spec_from_arrays
from strongrhi.theorems import rhi_worst_ratio

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])

positive = st.floats(0.1, 10.0, allow_nan=False)


@st.composite
def pairs(draw, dims=(1, 2), max_cells=5):
    dim = draw(st.sampled_from(dims))
    shape = [draw(st.integers(1, max_cells)) for _ in range(dim)]
    bps = []
    for k in shape:
        gaps = draw(st.lists(st.floats(0.2, 1.0), min_size=k, max_size=k))
        bps.append(np.concatenate([[0.0], np.cumsum(gaps)]))
    grid = AxisGrid(tuple(bps))
    n = int(np.prod(shape))
    dens = np.array(draw(st.lists(positive, min_size=n, max_size=n))).reshape(shape)
    vals = np.array(draw(st.lists(positive, min_size=n, max_size=n))).reshape(shape)
    mu = GridMeasure(grid, dens * grid.cell_volumes())
    return Weight(grid, vals), mu


class TestMaximal:
    @SETTINGS
    @given(pairs())
    def test_certified_sandwich(self, pair):
        w, mu = pair
        f = strong_maximal(w, mu, depth=1, mode="certified")
        assert f.integral("lower") <= f.integral() * (1 + 1e-12) <= f.integral("upper") * (1 + 1e-12)

    @SETTINGS
    @given(pairs(dims=(1,)))
    def test_depth_refines_nodes(self, pair):
        # nodes of depth d are nodes of depth d + 1 with the same value
        w, mu = pair
        a = strong_maximal(w, mu, depth=1).lower
        b = strong_maximal(w, mu, depth=2).lower
        np.testing.assert_allclose(b[::2], a, rtol=1e-12)

    @SETTINGS
    @given(pairs(dims=(1,)))
    def test_centered_below_strong(self, pair):
        w, mu = pair
        c = strong_maximal(w, mu, depth=1, operator="centered").lower
        s = strong_maximal(w, mu, depth=1).lower
        assert np.all(c <= s * (1 + 1e-12))

    @SETTINGS
    @given(pairs())
    def test_bounded_by_weight_range(self, pair):
        w, mu = pair
        f = strong_maximal(w, mu).lower
        assert np.all(f <= w.values.max() * (1 + 1e-12))
        assert np.all(f >= w.values.min() * (1 - 1e-12))


class TestConstants:
    @SETTINGS
    @given(pairs(max_cells=3), st.sampled_from([1.5, 2.0, 3.0]))
    def test_ap_enclosure(self, pair, p):
        w, mu = pair
        c = ap_star_constant(w, mu, p, tol=1e-4)
        # each factor is bounded by the extreme cell values, so A_p* <= max w / min w
        assert 1.0 <= c.lower <= c.upper
        assert c.lower <= w.values.max() / w.values.min() * (1 + 1e-12)
        if np.ptp(w.values) == 0:
            assert c.lower == 1.0

    @SETTINGS
    @given(pairs(max_cells=3), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_rhi_ratio_monotone_in_eps(self, pair, e1, e2):
        w, mu = pair
        lo, hi = sorted((e1, e2))
        r_lo = rhi_worst_ratio(w, mu, lo, refine=False)[0]
        r_hi = rhi_worst_ratio(w, mu, hi, refine=False)[0]
        assert r_lo <= r_hi * (1 + 1e-9)


class TestRisingSun:
    @SETTINGS
    @given(pairs(dims=(1,), max_cells=6), st.floats(0.05, 0.95))
    def test_postconditions(self, pair, t):
        w, mu = pair
        R = mu.grid.domain_rect()
        avg = average(w, mu, R)
        top = w.values.max()
        if top <= avg * (1 + 1e-9):
            return
        lam = avg + t * (top - avg)
        d = rising_sun_1d(w, mu, R, lam)
        ends = [r.bounds[0] for r in d.rects]
        for (a, b), (c, _) in zip(ends, ends[1:]):
            assert b <= c + 1e-12
        for a in d.averages:
            assert abs(a - lam) <= 1e-9 * lam
        assert d.residual <= lam * (1 + 1e-12)


class TestSpecRoundTrip:
    @SETTINGS
    @given(pairs())
    def test_round_trip(self, pair):
        w, mu = pair
        spec = spec_from_arrays(mu.grid, mu, w, [{"kind": "rising-sun", "lam": 2.0}])
        again = parse_spec(serialize_spec(spec))
        grid, mu2, w2 = again.build()
        for x, y in zip(grid.breakpoints, mu.grid.breakpoints):
            np.testing.assert_array_equal(x, y)
        np.testing.assert_array_equal(mu2.masses, mu.masses)
        np.testing.assert_array_equal(w2.values, w.values)
        assert again.tasks == spec.tasks
