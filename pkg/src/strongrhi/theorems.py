"""Verifiers for the quantitative inequalities on a fixed ``(mu, w, p)`` instance.

Every verifier returns a :class:`VerdictReport`.  Pass/fail verdicts take the
exponent (or ``s``) from a certified upper bound ``U`` of the relevant constant
or from a theoretical norm bound, so the inequality is guaranteed for the true
instance and a failure points at a bug.  Anything built from lower estimates
is reported but never fails.

Inequalities are checked on every grid-aligned rectangle and then on the
best few after a local ascent of the ratio in the continuous endpoints.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    ConstantInterval,
    a1_star_constant,
    ainf_fw_constant,
    ap_star_constant,
    doubling_constant,
)
from .errors import InputError, PreconditionError
from .maximal import majorization_check, op_norm_estimate
from .measure import (
    GridMeasure,
    Rect,
    Weight,
    aligned_sums,
    all_grid_rects,
    box_sums,
    conjugate,
    covered_fractions,
    cumulative,
    dual_weight,
    index_to_coords,
)

SLACK = 1e-12
EPS_MAX = 64.0
S_POLE_MARGIN = 1e-3
# largest exponent handed to exp() when powers of normalised weights are formed
_EXP_LIMIT = 700.0

RHI_VARIANTS = ("dim-free", "a1-remark", "line-ainfty", "nd-majorized", "maximal-norm", "doubling")
INTEGRABILITY_VARIANTS = ("a1-full", "maximal-norm")
WEAK_VARIANTS = ("level", "exchange", "weak-5")
OPEN_VARIANTS = ("ainfty", "maximal-norm")


# ---------------------------------------------------------------------------
# instance with cached constants


@dataclass
class Instance:
    """A weight, a measure, an exponent and lazily computed constants.

    ``tol`` drives the A_p* type searches, ``fw_tol``/``fw_budget`` the
    Fujii-Wilson search.  Looser tolerances only enlarge ``U`` and so shrink
    the exponents; verdicts stay sound.
    """

    w: Weight
    mu: GridMeasure
    p: float = 2.0
    fingerprint: dict = field(default_factory=dict)
    tol: float = 1e-9
    fw_tol: float = 0.05
    fw_budget: int = 20_000
    norm_budget: int = 400
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.w.grid.same_as(self.mu.grid):
            raise InputError("weight and measure live on different grids")
        if not self.fingerprint:
            self.fingerprint = {
                "grid": list(self.mu.grid.shape),
                "domain": [list(d) for d in self.mu.grid.domain],
            }

    @property
    def dim(self):
        return self.mu.grid.dim

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def ap(self, p=None) -> ConstantInterval:
        p = self.p if p is None else float(p)
        return self._cached(("ap", p), lambda: ap_star_constant(self.w, self.mu, p, tol=self.tol))

    def a1(self) -> ConstantInterval:
        return self._cached("a1", lambda: a1_star_constant(self.w, self.mu, tol=self.tol))

    def sigma(self, p=None) -> Weight:
        p = self.p if p is None else float(p)
        return self._cached(("sigma", p), lambda: dual_weight(self.w, p))

    def fw(self, of="w", p=None) -> ConstantInterval:
        p = self.p if p is None else float(p)
        target = self.w if of == "w" else self.sigma(p)
        key = ("fw", of, p if of != "w" else None)
        budget = self.fw_budget if self.dim == 1 else min(self.fw_budget, 500)
        return self._cached(
            key, lambda: ainf_fw_constant(target, self.mu, tol=self.fw_tol, budget=budget)
        )

    def doubling(self) -> ConstantInterval:
        return self._cached("doubling", lambda: doubling_constant(self.mu))

    def majorization(self, depth=None):
        depth = depth or max(1, int(np.ceil(np.log2(max(self.mu.grid.shape)))) + 2)
        root = self.mu.grid.domain_rect()
        return self._cached(("major", depth), lambda: majorization_check(self.w, self.mu, root, depth)[0])

    def norm_estimate(self, operator, q, of="w", weak=False):
        target = self.w if of == "w" else self.sigma()
        key = ("norm", operator, float(q), of, weak)
        return self._cached(
            key,
            lambda: op_norm_estimate(
                operator, q, target, self.mu, budget=self.norm_budget, seed=self.seed, weak=weak
            ),
        )

    def lebesgue_product(self):
        """True when the weight is a product weight and the measure is Lebesgue."""
        mu = self.mu
        vol = mu.grid.cell_volumes()
        scale = mu.total / vol.sum()
        lebesgue = np.allclose(mu.masses, scale * vol, rtol=1e-12, atol=0.0)
        return bool(lebesgue and (self.dim == 1 or self.w.is_product))


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class VerdictReport:
    """Outcome of one verifier on one instance."""

    theorem_id: str
    fingerprint: dict
    epsilon: float | None
    provenance: dict
    n_checked: int
    worst_ratio: float | None
    witness: Rect | None
    status: str
    wall_time: float
    flags: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def failed(self):
        return self.status == "fail"

    def to_dict(self, deterministic=False):
        out = {
            "theorem_id": self.theorem_id,
            "fingerprint": self.fingerprint,
            "epsilon": self.epsilon,
            "provenance": self.provenance,
            "n_checked": self.n_checked,
            "worst_ratio": self.worst_ratio,
            "witness": None if self.witness is None else self.witness.to_list(),
            "status": self.status,
            "flags": list(self.flags),
            "details": self.details,
        }
        if not deterministic:
            out["wall_time"] = self.wall_time
        return out


def _verdict(theorem_id, inst, eps, prov, n, worst, wit, sound, t0, slack, flags=None, details=None):
    flags = list(flags or [])
    if worst is not None and not np.isfinite(worst):
        flags.append("non-finite-ratio")
    if not sound:
        status = "report-only"
    elif worst is None:
        status = "pass"
    else:
        status = "fail" if not worst <= 1.0 + slack else "pass"
        if status == "pass" and worst > 1.0 - 10 * slack:
            flags.append("near-slack")
    return VerdictReport(
        theorem_id=theorem_id,
        fingerprint=dict(inst.fingerprint),
        epsilon=None if eps is None else float(eps),
        provenance=prov,
        n_checked=int(n),
        worst_ratio=None if worst is None else float(worst),
        witness=wit,
        status=status,
        wall_time=time.perf_counter() - t0,
        flags=flags,
        details=details or {},
    )


def _prov(constant, U, formula, sound, **extra):
    out = {"constant": constant, "U": None if U is None else float(U), "formula": formula, "sound": bool(sound)}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# rectangle sweeps


def _tables(mu, cellwise):
    return np.stack([cumulative(c * mu.masses) for c in cellwise] + [cumulative(mu.masses)])


def _ascent(mu, tables, ratio, lo, hi, max_iter=80, min_step=1e-6):
    """Pattern search on the endpoints of each rectangle, maximising ``ratio``."""
    grid = mu.grid
    n = grid.dim
    dlo = np.array([d[0] for d in grid.domain])
    dhi = np.array([d[1] for d in grid.domain])
    minw = 1e-9 * (dhi - dlo)
    null = mu.null_threshold()
    lo, hi = lo.copy(), hi.copy()
    S = box_sums(tables, grid, lo, hi)
    cur = np.where(S[-1] > null, ratio(S), -np.inf)
    step = np.full(len(lo), 0.5)
    checked = 0
    for _ in range(max_iter):
        active = step >= min_step
        if not active.any():
            break
        cand_lo, cand_hi, owner = [], [], []
        for k in np.nonzero(active)[0]:
            for i in range(n):
                for face in (0, 1):
                    x = lo[k, i] if face == 0 else hi[k, i]
                    width = grid.widths(i)[grid.locate(i, x)]
                    for sgn in (-1.0, 1.0):
                        a, b = lo[k].copy(), hi[k].copy()
                        if face == 0:
                            a[i] = np.clip(x + sgn * step[k] * width, dlo[i], b[i] - minw[i])
                        else:
                            b[i] = np.clip(x + sgn * step[k] * width, a[i] + minw[i], dhi[i])
                        cand_lo.append(a)
                        cand_hi.append(b)
                        owner.append(k)
        cand_lo, cand_hi, owner = np.array(cand_lo), np.array(cand_hi), np.array(owner)
        S = box_sums(tables, grid, cand_lo, cand_hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(S[-1] > null, ratio(S), -np.inf)
        val = np.where(np.isnan(val), -np.inf, val)
        checked += len(val)
        for k in np.nonzero(active)[0]:
            sel = np.nonzero(owner == k)[0]
            j = sel[np.argmax(val[sel])]
            if val[j] > cur[k]:
                cur[k], lo[k], hi[k] = val[j], cand_lo[j], cand_hi[j]
            else:
                step[k] *= 0.5
    return cur, lo, hi, checked


def worst_rectangle(mu: GridMeasure, cellwise, ratio, refine=True, top=4):
    """Largest ``ratio(S)`` over grid-aligned rectangles plus ascent refinement.

    ``cellwise`` lists per-cell quantities; ``S`` stacks their integrals
    against ``mu`` with the mass as the last row.  Returns
    ``(worst, witness, n_checked)``.
    """
    tables = _tables(mu, cellwise)
    ilo, ihi = all_grid_rects(mu.grid.shape)
    S = aligned_sums(tables, ilo, ihi)
    ok = S[-1] > mu.null_threshold()
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(ok, ratio(S), -np.inf)
    val = np.where(np.isnan(val), -np.inf, val)
    n = len(val)
    if not np.isfinite(val).any():
        return None, None, n
    lo, hi = index_to_coords(mu.grid, ilo, ihi)
    order = np.lexsort(tuple(ilo.T[::-1]) + tuple(ihi.T[::-1]) + (-val,))
    best = order[0]
    worst, wlo, whi = float(val[best]), lo[best], hi[best]
    if refine:
        pick = order[:top]
        pick = pick[np.isfinite(val[pick])]
        cur, rlo, rhi, extra = _ascent(mu, tables, ratio, lo[pick], hi[pick])
        n += extra
        k = int(np.argmax(cur))
        if cur[k] > worst:
            worst, wlo, whi = float(cur[k]), rlo[k], rhi[k]
    return worst, Rect(list(zip(wlo, whi))), n


def _normalised(w):
    """Weight values scaled to minimum 1 and the log of their ratio."""
    v = w.values / w.values.min()
    return v, float(np.log(v.max()))


def _power_ratio(e, C):
    """``ratio(S) = avg(w^e) / (C avg(w)^e)`` for rows ``(w^e, w, 1)``."""

    def ratio(S):
        m = S[2]
        return (S[0] / m) / (C * (S[1] / m) ** e)

    return ratio


def rhi_worst_ratio(w: Weight, mu: GridMeasure, eps, C=2.0, refine=True):
    """Worst ``avg(w^(1+eps)) / (C avg(w)^(1+eps))`` over the checked rectangles."""
    v, L = _normalised(w)
    if (1 + eps) * L > _EXP_LIMIT:
        raise PreconditionError("exponent too large for the weight's range")
    return worst_rectangle(mu, [v ** (1 + eps), v], _power_ratio(1 + eps, C), refine=refine)


def rhi_terms(w: Weight, mu: GridMeasure, rect, eps, C=2.0):
    """``(LHS, RHS)`` of the reverse Holder inequality on one rectangle."""
    return power_terms(w, mu, rect, 1.0 + eps, C)


def power_terms(w: Weight, mu: GridMeasure, rect, s, K):
    """``(avg_R w^s, K avg_R(w)^s)``."""
    rect = rect if isinstance(rect, Rect) else Rect(rect)
    tab = _tables(mu, [w.values**s, w.values])
    S = box_sums(tab, mu.grid, rect.lo[None], rect.hi[None])[:, 0]
    return float(S[0] / S[2]), float(K * (S[1] / S[2]) ** s)


def integrability_constant(U, s):
    """``s / (1 - (s - 1)(U - 1))``, the constant of the integrability bound."""
    den = 1.0 - (s - 1.0) * (U - 1.0)
    if den <= 0:
        raise PreconditionError(f"s = {s} is outside the admissible range for U = {U}")
    return s / den


# ---------------------------------------------------------------------------
# reverse Holder family


def _product_norm_bound(inst, p):
    """Bound on ``||M_s||_{L^p'(sigma)}`` for product weights and Lebesgue measure."""
    return 2.0 ** (p + 1) * inst.ap(p).upper


def verify_rhi_family(inst: Instance, variant, slack=SLACK) -> VerdictReport:
    t0 = time.perf_counter()
    p, n = inst.p, inst.dim
    C = 2.0
    sound = True
    flags = []
    if variant == "dim-free":
        if not p > 1:
            raise PreconditionError("dim-free variant needs p > 1")
        U = inst.ap().upper
        eps = 1.0 / (2.0 ** (p + 2) * U)
        prov = _prov("A_p*", U, "1/(2^(p+2) U)", True, p=p)
    elif variant == "a1-remark":
        U = inst.a1().upper
        eps = 1.0 / (16.0 * U)
        prov = _prov("A_1*", U, "1/(2^4 U)", True)
    elif variant == "line-ainfty":
        if n != 1:
            raise PreconditionError("line-ainfty variant is one-dimensional")
        U = inst.fw().upper
        eps = 1.0 / (4.0 * U - 1.0)
        prov = _prov("A_inf (Fujii-Wilson)", U, "1/(4U - 1)", True)
    elif variant == "nd-majorized":
        U = inst.fw().upper
        eps = 1.0 / (2.0 ** (n + 1) * U - 1.0)
        if n == 1 or inst.mu.is_product:
            cmaj, sound = 1.0, True
        else:
            # only a finite-depth estimate of the majorisation constant exists
            cmaj, sound = inst.majorization(), False
            flags.append("majorization-estimated")
        C = 2.0 * cmaj
        prov = _prov("A_inf* (Fujii-Wilson)", U, "1/(2^(n+1) U - 1)", sound, C=cmaj)
    elif variant == "maximal-norm":
        if not p > 1:
            raise PreconditionError("maximal-norm variant needs p > 1")
        if inst.lebesgue_product():
            N = _product_norm_bound(inst, p)
            prov = _prov("A_p*", inst.ap().upper, "N = 2^(p+1) U, eps = 1/(2N)", True, N=N)
        else:
            N = inst.norm_estimate("M_s", conjugate(p), of="sigma").value
            sound = False
            prov = _prov("||M_s|| estimate", None, "eps = 1/(2N), N a lower estimate", False, N=N)
        eps = 1.0 / (2.0 * N)
    elif variant == "doubling":
        Cmu = inst.doubling().upper
        U = inst.fw().upper
        eps = 1.0 / (2.0 * Cmu * U - 1.0)
        sound = False
        flags.append("heuristic-epsilon")
        prov = _prov("A_inf* (Fujii-Wilson)", U, "1/(2 C_mu U - 1)", False, C_mu=Cmu)
    else:
        raise InputError(f"unknown RHI variant {variant!r}; expected one of {RHI_VARIANTS}")
    worst, wit, count = rhi_worst_ratio(inst.w, inst.mu, eps, C=C)
    return _verdict(f"rhi/{variant}", inst, eps, prov, count, worst, wit, sound, t0, slack, flags)


# ---------------------------------------------------------------------------
# integrability family


def s_grid(s_max, count=8, cap=4.0):
    """Geometric grid of ``count`` exponents in ``(1, s_cap]``."""
    s_cap = cap if not np.isfinite(s_max) else 1.0 + (s_max - 1.0) * (1.0 - S_POLE_MARGIN)
    return s_cap ** (np.arange(1, count + 1) / count)


def verify_integrability_family(inst: Instance, variant, slack=SLACK, count=8) -> VerdictReport:
    t0 = time.perf_counter()
    sound = True
    if variant == "a1-full":
        U = inst.a1().upper
        prov = _prov("A_1*", U, "s < U/(U-1), K = s/(1-(s-1)(U-1))", True)
    elif variant == "maximal-norm":
        p = inst.p
        if not p > 1:
            raise PreconditionError("maximal-norm variant needs p > 1")
        if inst.lebesgue_product():
            U = _product_norm_bound(inst, p)
            prov = _prov("A_p*", inst.ap().upper, "N = 2^(p+1) U_Ap", True, N=U)
        else:
            U = inst.norm_estimate("M_s", conjugate(p), of="sigma").value
            sound = False
            prov = _prov("||M_s|| estimate", None, "N a lower estimate", False, N=U)
    else:
        raise InputError(f"unknown integrability variant {variant!r}; expected one of {INTEGRABILITY_VARIANTS}")
    flags = []
    if U <= 1.0 + 1e-12:
        # constant-like weight: every s > 1 is admissible with constant s
        U = 1.0
        s_max = np.inf
        flags.append("unit-constant")
    else:
        s_max = U / (U - 1.0)
    v, L = _normalised(inst.w)
    worst, wit, s_worst, total = -np.inf, None, None, 0
    per_s = {}
    for s in s_grid(s_max, count):
        if s * L > _EXP_LIMIT:
            flags.append("s-range-truncated")
            break
        K = integrability_constant(U, s)
        r, rect, k = worst_rectangle(inst.mu, [v**s, v], _power_ratio(s, K))
        total += k
        per_s[repr(float(s))] = r
        if r is not None and r > worst:
            worst, wit, s_worst = r, rect, float(s)
    prov["s_max"] = None if not np.isfinite(s_max) else float(s_max)
    details = {"s_values": sorted(per_s), "ratios": per_s}
    worst = None if wit is None else worst
    return _verdict(f"integrability/{variant}", inst, s_worst, prov, total, worst, wit, sound, t0, slack, flags, details)


# ---------------------------------------------------------------------------
# weak-type family


def level_terms(w: Weight, mu: GridMeasure, rect, lam, p, U):
    """``(w({w > lam} in R), 2 lam mu({w > w_R / (2^(p-1) U)} in R))``."""
    rect = rect if isinstance(rect, Rect) else Rect(rect)
    frac = covered_fractions(mu.grid, rect) * mu.masses
    wR = np.sum(frac * w.values) / np.sum(frac)
    lhs = np.sum(frac * w.values * (w.values > lam))
    rhs = 2.0 * lam * np.sum(frac * (w.values > wR / (2.0 ** (p - 1) * U)))
    return float(lhs), float(rhs)


def exchange_terms(w: Weight, mu: GridMeasure, rect, subset, p, U):
    """``((mu(E)/mu(R))^p, U w(E)/w(R))`` for a rectangle ``E`` inside ``R``."""
    rect = rect if isinstance(rect, Rect) else Rect(rect)
    subset = subset if isinstance(subset, Rect) else Rect(subset)
    fr = covered_fractions(mu.grid, rect) * mu.masses
    fe = covered_fractions(mu.grid, subset.intersect(rect)) * mu.masses
    lhs = (fe.sum() / fr.sum()) ** p
    rhs = U * np.sum(fe * w.values) / np.sum(fr * w.values)
    return float(lhs), float(rhs)


def _level_check(inst, U):
    """Exact supremum over ``lam > w_R`` of the level-lemma ratio, per grid rectangle."""
    w, mu, p = inst.w, inst.mu, inst.p
    vals = np.unique(w.values)
    K = len(vals)
    ind = [(w.values > v) for v in vals]
    tables = np.stack(
        [cumulative(w.values * mu.masses), cumulative(mu.masses)]
        + [cumulative(i * w.values * mu.masses) for i in ind]
        + [cumulative(i * mu.masses) for i in ind]
    )
    ilo, ihi = all_grid_rects(mu.grid.shape)
    S = aligned_sums(tables, ilo, ihi)
    m = S[1]
    ok = m > mu.null_threshold()
    wR = np.where(ok, S[0] / np.where(ok, m, 1.0), 0.0)
    Wk = S[2 : 2 + K]
    Mk = S[2 + K :]
    # mu({w > t}) on R for t = w_R / (2^(p-1) U): largest j with vals[j] <= t
    t = wR / (2.0 ** (p - 1) * U)
    j = np.searchsorted(vals, t, side="right") - 1
    rhs_mass = np.where(j >= 0, Mk[np.maximum(j, 0), np.arange(len(j))], m)
    best = np.full(len(m), -np.inf)
    best_lam = np.full(len(m), np.nan)
    for k in range(K - 1):
        # lam in [vals[k], vals[k+1]) and lam > w_R; the ratio falls with lam
        live = ok & (vals[k + 1] > wR) & (Wk[k] > 0)
        lam = np.maximum(wR, vals[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(live, Wk[k] / (2.0 * lam * rhs_mass), -np.inf)
        upd = r > best
        best = np.where(upd, r, best)
        best_lam = np.where(upd, lam, best_lam)
    return best, best_lam, ilo, ihi, len(m) * max(K - 1, 1)


def _exchange_check(inst, U, pairs, rng):
    w, mu, p = inst.w, inst.mu, inst.p
    grid = mu.grid
    worst, wit, extra = -np.inf, None, None
    n = 0
    dom = grid.domain
    attempts = 0
    while n < pairs and attempts < 20 * pairs:
        attempts += 1
        bounds = []
        for a, b in dom:
            x, y = np.sort(rng.uniform(a, b, 2))
            bounds.append((x, max(y, x + 1e-9 * (b - a))))
        R = Rect(bounds)
        fr = covered_fractions(grid, R) * mu.masses
        if fr.sum() <= mu.null_threshold():
            continue
        # keep each charged cell with probability 1/2, and at least one of them
        keep = (rng.uniform(size=grid.shape) < 0.5) & (fr > 0)
        if not keep.any():
            keep.flat[rng.choice(np.flatnonzero(fr > 0))] = True
        fe = fr * rng.uniform(1e-3, 1.0, size=grid.shape) * keep
        n += 1
        r = (fe.sum() / fr.sum()) ** p / (U * np.sum(fe * w.values) / np.sum(fr * w.values))
        if r > worst:
            worst, wit, extra = float(r), R, {"kind": "random-fragments"}
    # sublevel sets {w <= t} are the extremal E for each size
    vals = np.unique(w.values)[:-1]
    ilo, ihi = all_grid_rects(grid.shape)
    base = [cumulative(mu.masses), cumulative(w.values * mu.masses)]
    ind = [w.values <= v for v in vals]
    tables = np.stack(base + [cumulative(i * mu.masses) for i in ind] + [cumulative(i * w.values * mu.masses) for i in ind])
    S = aligned_sums(tables, ilo, ihi)
    K = len(vals)
    mR, wR = S[0], S[1]
    mE, wE = S[2 : 2 + K], S[2 + K :]
    null = mu.null_threshold()
    ok = (mR > null)[None, :] & (mE > null) & (mE < mR * (1 - 1e-12))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(ok, (mE / mR) ** p / (U * wE / wR), -np.inf)
    n += int(ok.sum())
    if ok.any():
        k, j = np.unravel_index(int(np.argmax(r)), r.shape)
        if r[k, j] > worst:
            lo, hi = index_to_coords(grid, ilo[j : j + 1], ihi[j : j + 1])
            worst, wit = float(r[k, j]), Rect(list(zip(lo[0], hi[0])))
            extra = {"kind": "sublevel", "t": float(vals[k])}
    return worst, wit, n, extra


def verify_weak_family(inst: Instance, variant, slack=SLACK, pairs=1000, rng=None) -> VerdictReport:
    t0 = time.perf_counter()
    p = inst.p
    if not p > 1:
        raise PreconditionError("weak-type variants need p > 1")
    if variant == "level":
        U = inst.ap().upper
        best, lam, ilo, ihi, n = _level_check(inst, U)
        prov = _prov("A_p*", U, "w({w>lam}) <= 2 lam mu({w > w_R/(2^(p-1) U)})", True)
        if not np.isfinite(best).any():
            return _verdict("weak/level", inst, None, prov, n, None, None, True, t0, slack)
        k = int(np.argmax(best))
        lo, hi = index_to_coords(inst.mu.grid, ilo[k : k + 1], ihi[k : k + 1])
        wit = Rect(list(zip(lo[0], hi[0])))
        return _verdict(
            "weak/level", inst, None, prov, n, float(best[k]), wit, True, t0, slack,
            details={"lambda": float(lam[k])},
        )
    if variant == "exchange":
        U = inst.ap().upper
        rng = rng if rng is not None else np.random.default_rng(inst.seed)
        worst, wit, n, extra = _exchange_check(inst, U, pairs, rng)
        prov = _prov("A_p*", U, "(mu(E)/mu(R))^p <= U w(E)/w(R)", True)
        worst = None if wit is None else worst
        return _verdict("weak/exchange", inst, None, prov, n, worst, wit, True, t0, slack, details={"witness_set": extra})
    if variant == "weak-5":
        if inst.dim != 1:
            raise PreconditionError("weak-5 variant is one-dimensional")
        U = inst.ap().upper
        est = inst.norm_estimate("M", p, weak=True)
        bound = 5.0 * U ** (1.0 / p)
        prov = _prov("A_q", U, "5 U^(1/q)", True, q=p)
        return _verdict(
            "weak/weak-5", inst, None, prov, est.evaluations, est.value / bound, None, True, t0, slack,
            details={"estimate": est.value, "bound": bound, "test_function": est.witness},
        )
    raise InputError(f"unknown weak variant {variant!r}; expected one of {WEAK_VARIANTS}")


# ---------------------------------------------------------------------------
# open property


def verify_open_property(inst: Instance, variant, slack=SLACK) -> VerdictReport:
    t0 = time.perf_counter()
    p = inst.p
    if not p > 1:
        raise PreconditionError("open property needs p > 1")
    flags = []
    sound = True
    if variant == "ainfty":
        if inst.dim != 1:
            raise PreconditionError("ainfty open property is one-dimensional")
        Us = inst.fw(of="sigma").upper
        eps = (p - 1.0) / (1.0 + 4.0 * Us)
        prov = _prov("A_inf (Fujii-Wilson) of sigma", Us, "(p-1)/(1+4U)", True)
    elif variant == "maximal-norm":
        if inst.lebesgue_product():
            U = inst.ap().upper
            # the norm of M_s on L^p(w) enters through the dual weight too; the
            # larger of the two product bounds gives the smaller, safe exponent
            N = max(2.0 ** (p + 1) * U, 2.0 ** (conjugate(p) + 1) * U ** (1.0 / (p - 1.0)))
            prov = _prov("A_p*", U, "(p-1)/(1+2N)", True, N=N)
        else:
            N = inst.norm_estimate("M_s", conjugate(p), of="sigma").value
            sound = False
            prov = _prov("||M_s|| estimate", None, "(p-1)/(1+2N), N a lower estimate", False, N=N)
        eps = (p - 1.0) / (1.0 + 2.0 * N)
    else:
        raise InputError(f"unknown open-property variant {variant!r}; expected one of {OPEN_VARIANTS}")
    if eps >= p - 1.0:
        eps = (p - 1.0) * (1.0 - 1e-6)
        flags.append("epsilon-clamped")
    Uap = inst.ap().upper
    low = ap_star_constant(inst.w, inst.mu, p - eps, tol=max(inst.tol, 1e-4))
    bound = 2.0 ** (p - 1.0) * Uap
    details = {"q": p - eps, "L_q": low.lower, "U_q": low.upper, "bound": bound}
    return _verdict(f"open/{variant}", inst, eps, prov, low.boxes_explored, low.lower / bound, low.witness,
                    sound, t0, slack, flags, details)


# ---------------------------------------------------------------------------
# mixed norm diagnostics


def verify_mixed_norms(inst: Instance) -> VerdictReport:
    """Ratios of norm lower estimates to bound formulas with unit constants."""
    t0 = time.perf_counter()
    p, n = inst.p, inst.dim
    pp = conjugate(p)
    U = inst.ap().upper
    ratios, notes = {}, []
    est_s = inst.norm_estimate("M_s", p)
    weak_s = inst.norm_estimate("M_s", p, weak=True)
    Us = inst.fw(of="sigma").upper
    if est_s.value > 0:
        ratios["buckley-strong"] = est_s.value / U ** (1.0 / (p - 1.0))
        ratios["strong-mixed"] = est_s.value / (pp**n * U ** (1.0 / p + 2.0 * (n - 1) / (p - 1.0)) * Us ** (1.0 / p))
        if weak_s.value > 0:
            ratios["weak-strong-bridge"] = est_s.value / (pp * weak_s.value * est_s.value ** (1.0 / p))
    else:
        notes.append("no estimate")
    if n == 1:
        est = inst.norm_estimate("M", p)
        ratios["mixed-ap-ainf"] = est.value / (pp * U * Us) ** (1.0 / p)
        ratios["buckley"] = est.value / U ** (1.0 / (p - 1.0))
    if inst.w.is_product or n == 1:
        if weak_s.value > 0:
            ratios["product-weak"] = weak_s.value / U ** ((1.0 / (p - 1.0)) * (1.0 - 1.0 / (n * p)))
    worst = max(ratios.values()) if ratios else None
    prov = _prov("A_p*", U, "unit constants", False, U_sigma_fw=Us)
    details = {"ratios": ratios, "notes": notes, "estimates": {"M_s": est_s.value, "M_s weak": weak_s.value}}
    return _verdict("mixed-norms", inst, None, prov, est_s.evaluations, worst, None, False, t0, SLACK, details=details)


# ---------------------------------------------------------------------------
# empirical exponent range


@dataclass
class EmpiricalRange:
    """Largest verified exponent and the theoretical candidates."""

    epsilon: float
    bracket: tuple
    capped: bool
    candidates: dict
    passed: bool

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "bracket": list(self.bracket),
            "capped": self.capped,
            "candidates": self.candidates,
            "passed": self.passed,
        }


def _rhi_ok(w, mu, eps, refine):
    worst, _, _ = rhi_worst_ratio(w, mu, eps, C=2.0, refine=refine)
    return worst is None or worst <= 1.0 + SLACK


def empirical_rhi_range(inst: Instance, eps_max=EPS_MAX, iterations=60) -> EmpiricalRange:
    """Bisection for the largest ``eps`` with the reverse Holder bound intact.

    This is an upper estimate of the admissible range: only the checked
    rectangles enter.  Every sound candidate must not exceed it.
    """
    w, mu, p, n = inst.w, inst.mu, inst.p, inst.dim
    _, L = _normalised(w)
    hi_lim = eps_max if L == 0 else min(eps_max, _EXP_LIMIT / L - 1.0)
    cands = {}
    if p > 1:
        U = inst.ap().upper
        cands["dim-free"] = {"value": 1.0 / (2.0 ** (p + 2) * U), "sound": True}
        if inst.lebesgue_product():
            N = _product_norm_bound(inst, p)
            cands["maximal-norm"] = {"value": 1.0 / (2.0 * N), "sound": True}
        else:
            N = inst.norm_estimate("M_s", conjugate(p), of="sigma").value
            cands["maximal-norm"] = {"value": 1.0 / (2.0 * N), "sound": False}
    Ufw = inst.fw().upper
    cands["ainfty"] = {"value": 1.0 / (2.0 ** (n + 1) * Ufw - 1.0), "sound": n == 1 or mu.is_product}
    capped = False
    if _rhi_ok(w, mu, hi_lim, refine=False):
        lo, hi = hi_lim, hi_lim
        capped = True
    else:
        lo, hi = 0.0, hi_lim
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if _rhi_ok(w, mu, mid, refine=False):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-9 * hi:
                break
    # the refined rectangles can only lower the estimate
    if lo > 0 and not _rhi_ok(w, mu, lo, refine=True):
        hi, lo = lo, 0.0
        for _ in range(iterations // 2):
            mid = 0.5 * (lo + hi)
            if _rhi_ok(w, mu, mid, refine=True):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-9 * hi:
                break
    eps_emp = lo
    for c in cands.values():
        if c["sound"] and c["value"] > eps_emp and _rhi_ok(w, mu, c["value"], refine=True):
            eps_emp = c["value"]
    passed = all(c["value"] <= eps_emp for c in cands.values() if c["sound"])
    return EmpiricalRange(float(eps_emp), (float(lo), float(hi)), capped, cands, passed)


def verify_empirical_range(inst: Instance, slack=SLACK) -> VerdictReport:
    t0 = time.perf_counter()
    er = empirical_rhi_range(inst)
    sound = [c["value"] for c in er.candidates.values() if c["sound"]]
    worst = max(sound) / er.epsilon if sound and er.epsilon > 0 else (None if not sound else np.inf)
    prov = _prov("candidates", None, "eps_emp >= each sound candidate", True)
    return _verdict("rhi/empirical-range", inst, er.epsilon, prov, len(er.candidates), worst, None, True, t0,
                    slack, details=er.to_dict())


# ---------------------------------------------------------------------------
# dispatch


THEOREMS = {
    **{f"rhi/{v}": (verify_rhi_family, v) for v in RHI_VARIANTS},
    **{f"integrability/{v}": (verify_integrability_family, v) for v in INTEGRABILITY_VARIANTS},
    **{f"weak/{v}": (verify_weak_family, v) for v in WEAK_VARIANTS},
    **{f"open/{v}": (verify_open_property, v) for v in OPEN_VARIANTS},
    "mixed-norms": (lambda inst, _v, slack=SLACK: verify_mixed_norms(inst), None),
    "rhi/empirical-range": (lambda inst, _v, slack=SLACK: verify_empirical_range(inst, slack), None),
}


def applicable(theorem_id, inst: Instance):
    """Whether a theorem applies to the instance's dimension and exponent."""
    if theorem_id in ("rhi/line-ainfty", "weak/weak-5", "open/ainfty"):
        return inst.dim == 1 and inst.p > 1
    if theorem_id in ("rhi/a1-remark", "integrability/a1-full", "rhi/nd-majorized", "rhi/doubling"):
        return True
    return inst.p > 1


def run_theorem(theorem_id, inst: Instance, slack=SLACK) -> VerdictReport:
    if theorem_id not in THEOREMS:
        raise InputError(f"unknown theorem {theorem_id!r}")
    fn, variant = THEOREMS[theorem_id]
    return fn(inst, variant, slack=slack)
