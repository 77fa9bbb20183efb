import json

import pytest

from strongrhi.campaign import default_workers, make_instance, resolve_config, run_campaign
from strongrhi.errors import InputError
from strongrhi.report import dumps

SMALL = {
    "count": 6,
    "sizes": {1: [4, 8], 2: [2, 3]},
    "theorems": ["rhi/dim-free", "weak/level", "open/ainfty", "mixed-norms"],
    "tol": 1e-4,
    "norm_budget": 30,
    "exchange_pairs": 20,
}


def canonical(result):
    return dumps(result.to_dict(deterministic=True))


class TestConfig:
    def test_defaults(self):
        cfg = resolve_config()
        assert cfg["count"] == 200 and cfg["dims"] == [1, 2]
        assert set(cfg["sizes"]) == {1, 2}

    @pytest.mark.parametrize(
        "bad",
        [
            {"bogus": 1},
            {"count": -1},
            {"dims": [3]},
            {"sizes": {1: [0]}},
            {"sizes": {1: [17]}},
            {"p_values": [1.0]},
            {"measures": ["nope"]},
            {"weights": ["nope"]},
            {"theorems": ["rhi/nope"]},
            {"density_ratio": 1.0},
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(InputError):
            resolve_config(bad)

    def test_string_size_keys(self):
        assert resolve_config({"sizes": {"1": [4], "2": [2]}})["sizes"] == {1: [4], 2: [2]}

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv("STRONGRHI_THREADS", "3")
        assert default_workers() == 3
        monkeypatch.setenv("STRONGRHI_THREADS", "x")
        with pytest.raises(InputError):
            default_workers()


class TestDeterminism:
    def test_instances_depend_only_on_seed_and_index(self):
        cfg = resolve_config(SMALL)
        a, b = make_instance(cfg, 5, 3), make_instance(cfg, 5, 3)
        assert a.fingerprint == b.fingerprint
        assert (a.w.values == b.w.values).all() and (a.mu.masses == b.mu.masses).all()
    def test_repeatable(self):
        assert canonical(run_campaign(SMALL, seed=1)) == canonical(run_campaign(SMALL, seed=1))

    def test_parallel_matches_serial(self):
        serial = run_campaign(SMALL, seed=2, workers=1)
        parallel = run_campaign(SMALL, seed=2, workers=2)
        assert canonical(serial) == canonical(parallel)

    def test_summary(self):
        res = run_campaign(SMALL, seed=3)
        s = res.summary
        assert s["verdicts"] == len(res.verdicts)
        assert s["failures"] == 0 and s["status"] == "pass" and not res.failed
        assert s["by_theorem"]["mixed-norms"]["report-only"] == SMALL["count"]
        json.loads(canonical(res))

    def test_empty(self):
        res = run_campaign({"count": 0})
        assert res.verdicts == [] and res.summary["status"] == "pass"
