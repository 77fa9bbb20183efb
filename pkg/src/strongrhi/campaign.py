"""Randomised campaigns: many generated instances, every applicable verifier.

Instance ``i`` is drawn from its own stream ``SeedSequence([seed, i])`` so the
campaign is reproducible and independent of worker scheduling.  Workers come
from ``STRONGRHI_THREADS`` (processes); results are merged in instance order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .generators import MEASURE_KINDS, WEIGHT_KINDS, make_measure, make_weight
from .measure import AxisGrid
from .theorems import SLACK, THEOREMS, Instance, applicable, run_theorem

DEFAULT_CONFIG = {
    "count": 200,
    "dims": [1, 2],
    "sizes": {1: [4, 8, 16], 2: [2, 4, 8]},
    "p_values": [1.5, 2.0, 3.0],
    "measures": list(MEASURE_KINDS),
    "weights": list(WEIGHT_KINDS),
    "theorems": sorted(THEOREMS),
    "density_ratio": 8.0,
    "weight_log_ratio": 4.0,
    "nonuniform": 0.5,
    "tol": 1e-3,
    "fw_tol": 0.05,
    "fw_budget": 20_000,
    "norm_budget": 200,
    "exchange_pairs": 200,
    "slack": SLACK,
}
MAX_CELLS_PER_AXIS = 16


@dataclass
class CampaignResult:
    config: dict
    seed: int
    verdicts: list
    summary: dict = field(default_factory=dict)

    @property
    def failed(self):
        return self.summary.get("failures", 0) > 0

    def to_dict(self, deterministic=False):
        return {
            "config": self.config,
            "seed": self.seed,
            "summary": self.summary,
            "verdicts": [v.to_dict(deterministic) for v in self.verdicts],
        }


def resolve_config(config=None):
    """Merge ``config`` into the defaults and validate it."""
    cfg = {k: (dict(v) if isinstance(v, dict) else v) for k, v in DEFAULT_CONFIG.items()}
    for key, val in (config or {}).items():
        if key not in DEFAULT_CONFIG:
            raise InputError(f"unknown campaign key {key!r}")
        cfg[key] = val
    cfg["sizes"] = {int(k): [int(x) for x in v] for k, v in cfg["sizes"].items()}
    if int(cfg["count"]) < 0:
        raise InputError("count must be >= 0")
    cfg["count"] = int(cfg["count"])
    for d in cfg["dims"]:
        if d not in (1, 2):
            raise InputError("campaign dimensions must be 1 or 2")
        sizes = cfg["sizes"].get(d)
        if not sizes or any(not 1 <= s <= MAX_CELLS_PER_AXIS for s in sizes):
            raise InputError(f"sizes for dimension {d} must lie in [1, {MAX_CELLS_PER_AXIS}]")
    if any(not float(p) > 1 for p in cfg["p_values"]):
        raise InputError("p values must exceed 1")
    for m in cfg["measures"]:
        if m not in MEASURE_KINDS:
            raise InputError(f"unknown measure kind {m!r}")
    for w in cfg["weights"]:
        if w not in WEIGHT_KINDS:
            raise InputError(f"unknown weight kind {w!r}")
    for t in cfg["theorems"]:
        if t not in THEOREMS:
            raise InputError(f"unknown theorem {t!r}")
    if not float(cfg["density_ratio"]) > 1 or not float(cfg["weight_log_ratio"]) > 0:
        raise InputError("density_ratio must exceed 1 and weight_log_ratio must be positive")
    return cfg


def _breakpoints(rng, lo, hi, k, nonuniform):
    if rng.uniform() >= nonuniform:
        return np.linspace(lo, hi, k + 1)
    # interior breakpoints jittered inside their uniform slots; widths vary by <= 3x
    base = np.linspace(lo, hi, k + 1)
    h = (hi - lo) / k
    inner = base[1:-1] + rng.uniform(-0.25, 0.25, k - 1) * h
    return np.concatenate([[lo], inner, [hi]])


def make_instance(cfg, seed, index) -> Instance:
    """Instance ``index`` of a campaign; depends only on ``(cfg, seed, index)``."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    dim = int(rng.choice(cfg["dims"]))
    sizes = cfg["sizes"][dim]
    shape = [int(rng.choice(sizes)) for _ in range(dim)]
    mkind = str(rng.choice(cfg["measures"]))
    wkind = str(rng.choice(cfg["weights"]))
    p = float(rng.choice(cfg["p_values"]))
    lo, hi = (-1.0, 1.0) if mkind == "gaussian" else (0.0, 1.0)
    grid = AxisGrid(tuple(_breakpoints(rng, lo, hi, k, cfg["nonuniform"]) for k in shape))
    R = float(cfg["density_ratio"])
    L = float(cfg["weight_log_ratio"])
    mparams = {"random-density": {"B": R**0.5}, "product-of-1d": {"B": R ** (0.5 / dim)}}.get(mkind, {})
    if wkind == "random-log-bounded-weight":
        wparams = {"B": float(np.exp(L / 2))}
    elif wkind == "product-weight":
        wparams = {"B": float(np.exp(L / (2 * dim)))}
    elif wkind == "power-weight":
        center = [float(rng.uniform(lo, hi)) for _ in range(dim)]
        wparams = {"alpha": float(rng.uniform(0.1, 0.9)), "center": center}
    else:
        wparams = {"c": float(np.exp(rng.uniform(-1, 1)))}
    s_mu, s_w = rng.spawn(2)
    mu = make_measure(mkind, grid, mparams, seed=s_mu)
    w = make_weight(wkind, grid, wparams, seed=s_w)
    fp = {
        "instance": int(index),
        "seed": int(seed),
        "dim": dim,
        "grid": shape,
        "measure": mkind,
        "weight": wkind,
        "weight_params": wparams,
        "p": p,
    }
    return Instance(
        w,
        mu,
        p,
        fingerprint=fp,
        tol=float(cfg["tol"]),
        fw_tol=float(cfg["fw_tol"]),
        fw_budget=int(cfg["fw_budget"]),
        norm_budget=int(cfg["norm_budget"]),
        seed=int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0]),
    )


def _run_one(args):
    cfg, seed, index = args
    inst = make_instance(cfg, seed, index)
    out = []
    for tid in cfg["theorems"]:
        if not applicable(tid, inst):
            continue
        if tid == "weak/exchange":
            from .theorems import verify_weak_family

            rng = np.random.default_rng(inst.seed)
            out.append(verify_weak_family(inst, "exchange", slack=cfg["slack"], pairs=cfg["exchange_pairs"], rng=rng))
        else:
            out.append(run_theorem(tid, inst, slack=cfg["slack"]))
    return out


def summarize(verdicts):
    by = {}
    for v in verdicts:
        s = by.setdefault(v.theorem_id, {"pass": 0, "fail": 0, "report-only": 0, "worst_ratio": None})
        s[v.status] += 1
        if v.worst_ratio is not None and np.isfinite(v.worst_ratio):
            s["worst_ratio"] = v.worst_ratio if s["worst_ratio"] is None else max(s["worst_ratio"], v.worst_ratio)
    failures = sum(s["fail"] for s in by.values())
    return {
        "verdicts": len(verdicts),
        "failures": failures,
        "passes": sum(s["pass"] for s in by.values()),
        "report_only": sum(s["report-only"] for s in by.values()),
        "by_theorem": {k: by[k] for k in sorted(by)},
        "status": "fail" if failures else "pass",
    }


def default_workers():
    raw = os.environ.get("STRONGRHI_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise InputError(f"STRONGRHI_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def run_campaign(config=None, seed=0, workers=None) -> CampaignResult:
    """Run every configured verifier on ``count`` generated instances."""
    cfg = resolve_config(config)
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(cfg, int(seed), i) for i in range(cfg["count"])]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_instance = list(pool.map(_run_one, jobs))
    else:
        per_instance = [_run_one(j) for j in jobs]
    verdicts = [v for block in per_instance for v in block]
    public = dict(cfg)
    public["sizes"] = {str(k): v for k, v in cfg["sizes"].items()}
    return CampaignResult(public, int(seed), verdicts, summarize(verdicts))
