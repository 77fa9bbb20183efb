import numpy as np
import pytest

from strongrhi import kernels
from strongrhi.measure import cumulative

from conftest import random_pair

needs_compiled = pytest.mark.skipif(kernels._compiled is None, reason="compiled extension not built")


def tables(seed, shape):
    w, mu = random_pair(np.random.default_rng(seed), shape)
    return cumulative(w.values * mu.masses), cumulative(mu.masses), mu.null_threshold()


class TestBackends:
    def test_backend_name(self):
        assert kernels.BACKEND in ("compiled", "python")

    @needs_compiled
    @pytest.mark.parametrize("shape", [(1,), (7,), (33,), (3, 4), (8, 5)])
    def test_compiled_matches_python(self, shape):
        for seed in range(3):
            cf, cm, null = tables(seed, shape)
            a = kernels.sweep_max(cf, cm, null, backend="compiled")
            b = kernels.sweep_max(cf, cm, null, backend="python")
            for x, y in zip(a, b):
                np.testing.assert_allclose(x, y, rtol=1e-12)

    def test_python_against_brute_force(self):
        # interval [i, j) of cells; contain/meet/point maxima from first principles
        cf, cm, null = tables(1, (6,))
        contain, meet, point = kernels.sweep_max(cf, cm, null, backend="python")
        f, m = np.diff(cf), np.diff(cm)
        avg = {(i, j): f[i:j].sum() / m[i:j].sum() for i in range(6) for j in range(i + 1, 7)}
        for s in range(6):
            assert contain[s] == pytest.approx(max(a for (i, j), a in avg.items() if i <= s < j), rel=1e-12)
            assert meet[s] == pytest.approx(max(a for (i, j), a in avg.items() if i <= s + 1 and j >= s), rel=1e-12)
        for q in range(7):
            assert point[q] == pytest.approx(max(a for (i, j), a in avg.items() if i <= q <= j), rel=1e-12)

    def test_three_dimensions_fall_back(self):
        cf, cm, null = tables(2, (2, 2, 2))
        for x, y in zip(kernels.sweep_max(cf, cm, null), kernels.sweep_max(cf, cm, null, backend="python")):
            np.testing.assert_array_equal(x, y)
