import numpy as np
import pytest

from strongrhi.errors import InputError
from strongrhi.specfile import SpecError, parse_spec, serialize_spec, spec_from_arrays

from conftest import random_pair, w0_pair

W0_SPEC = """\
version: 1
domain: [[0, 1]]
grid:
  cells: [4]
weight:
  values: [1, 1, 1, 2]
tasks:
  - {kind: constants, constant: ap, p: 2}
  - {kind: rising-sun, lam: 1.5}
"""


class TestParse:
    def test_w0(self):
        spec = parse_spec(W0_SPEC)
        grid, mu, w = spec.build()
        np.testing.assert_allclose(grid.breakpoints[0], [0, 0.25, 0.5, 0.75, 1])
        np.testing.assert_allclose(mu.masses, 0.25)
        np.testing.assert_allclose(w.values, [1, 1, 1, 2])
        assert [t["kind"] for t in spec.tasks] == ["constants", "rising-sun"]

    def test_generators(self):
        text = "grid: {cells: [3, 2]}\nmeasure: {generator: random-density, params: {B: 2}, seed: 1}\n" \
               "weight: {generator: product-weight, params: {B: 2}, seed: 3}\n"
        a = parse_spec(text).build()
        b = parse_spec(text).build()
        np.testing.assert_array_equal(a[1].masses, b[1].masses)
        np.testing.assert_array_equal(a[2].values, b[2].values)
        assert a[2].is_product

    def test_max_cells(self):
        with pytest.raises(InputError, match="limit"):
            parse_spec("grid: {cells: [10, 10]}\nweight: {generator: constant}\n").build(max_cells=50)

    @pytest.mark.parametrize(
        "text, where, what",
        [
            ("grid: {cells: [2]}\nweight: {values: [1, -1]}\n", "line 2, column 22", "nonpositive weight"),
            ("grid: {breakpoints: [[0, 0.5, 0.4, 1]]}\nweight: {values: [1, 1, 1]}\n", "line 1", "index 2"),
            ("grid: {cells: [2]}\nweight: {values: [1, 1]}\nbogus: 1\n", "line 3, column 1", "unknown key"),
            ("grid: {cells: [2]}\nweight: {values: [1, 1]}\nweight: {values: [1, 1]}\n", "line 3", "duplicate"),
            ("grid: {cells: [2]}\nweight: {values: [1, 1, 1]}\n", "line 2", "shape"),
            ("grid: {cells: [2]}\n", "line 1", "weight"),
            ("grid: {cells: [2]}\nweight: {values: [1, 1]}\nmeasure: {masses: [1, -2]}\n", "line 3", "negative mass"),
            ("grid: {cells: [2]}\nweight: {values: [1, 1]}\nversion: 2\n", "line 3", "version"),
            ("grid: {cells: [2]}\nweight: {values: [1, 1]}\ntasks:\n  - {kind: nope}\n", "line 4", "task kind"),
            ("a: [1\n", "line 2", "malformed YAML"),
        ],
    )
    def test_errors_carry_position(self, text, where, what):
        with pytest.raises(SpecError) as err:
            parse_spec(text)
        assert where in str(err.value) and what in str(err.value)


class TestRoundTrip:
    def test_w0(self):
        spec = parse_spec(W0_SPEC)
        again = parse_spec(serialize_spec(spec))
        assert again == spec

    @pytest.mark.parametrize("seed", range(4))
    def test_random_arrays(self, seed):
        rng = np.random.default_rng(seed)
        w, mu = random_pair(rng, (3,) if seed % 2 else (2, 3))
        spec = spec_from_arrays(mu.grid, mu, w, [{"kind": "verify", "p": 2.0}])
        grid, mu2, w2 = parse_spec(serialize_spec(spec)).build()
        for a, b in zip(grid.breakpoints, mu.grid.breakpoints):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(mu2.masses, mu.masses)
        np.testing.assert_array_equal(w2.values, w.values)

    def test_serialization_is_stable(self):
        w, mu = w0_pair()
        spec = spec_from_arrays(mu.grid, mu, w, [])
        assert serialize_spec(spec) == serialize_spec(parse_spec(serialize_spec(spec)))
