"""Decision engine: sufficient criteria for p-parabolicity of the
submanifold described by a comparison constellation.

Lower tangency requires a non-negative balance and a divergent weight
integral; upper tangency requires a non-positive balance and divergence of
the g == 1 weight.  Two shortcut corollaries cover warping functions bounded
below by a positive constant and monotonicity in p.  The criteria are
sufficient only: the engine never claims hyperbolicity, it answers
"p-parabolic" or "inconclusive" with structured evidence.

Hypotheses are certified numerically on a geometric grid from
``min(rho, 1e-3)`` out to the tail horizon plus the tail-fit window, not on
all of ``(0, infinity)``; every verdict carries the certified interval.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constellation import (
    BalanceProfile, Constellation, Tangency, _balance_terms, balance_sign,
    weight_function,
)
from .dirichlet import drifted_capacity
from .errors import DomainError, RadialCapError
from .expr import eval_jet2, evaluate
from .model import validate_warping
from .quadrature import CumulativeCache, TailClass, TailConfig, classify_tail
from .runtime import resolve_workers

__all__ = [
    "ClassifyConfig",
    "InconclusiveReason",
    "Verdict",
    "classify",
    "classify_bounded_w",
    "classify_monotone",
    "sweep",
    "SweepRow",
]

THEOREM_LOWER = "theorem_lower_tangency"
THEOREM_UPPER = "theorem_upper_tangency"
COR_BOUNDED_W = "corollary_bounded_warping"
COR_MONOTONE = "corollary_monotone_in_p"


@dataclass(frozen=True)
class ClassifyConfig:
    """Grid and tail-classifier knobs; defaults match the module contracts."""

    grid_min: Optional[float] = None       # default: min(rho, 1e-3)
    grid_points: int = 512
    tail: TailConfig = field(default_factory=TailConfig)
    weight_rel_tol: float = 1e-10
    validate_model: bool = True

    def lo(self, rho: float) -> float:
        return self.grid_min if self.grid_min is not None else min(rho, 1e-3)

    def horizon(self, rho: float) -> float:
        return rho * 2.0 ** self.tail.k_max


@dataclass(frozen=True)
class InconclusiveReason:
    """Structured reason: balance_fails | tail_convergent | tail_undetermined
    | p_below_2, with whatever payload the failure produced."""

    code: str
    message: str = ""
    witnesses: tuple = ()
    value: Optional[float] = None

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message,
                "witnesses": [float(w) for w in self.witnesses], "value": self.value}


@dataclass(frozen=True)
class Verdict:
    """Outcome of a criterion: ``p_parabolic`` (with the result used and its
    evidence) or ``inconclusive`` (with a structured reason).  Hyperbolicity
    is never asserted."""

    outcome: str
    p: float
    rho: float
    by: Optional[str] = None
    reason: Optional[InconclusiveReason] = None
    balance: Optional[BalanceProfile] = None
    tail: Optional[TailClass] = None
    certified_interval: Optional[tuple] = None
    warnings: tuple = ()
    checks: tuple = ()   # (name, passed, detail)

    @property
    def is_parabolic(self) -> bool:
        return self.outcome == "p_parabolic"

    def summary(self) -> str:
        if self.is_parabolic:
            return f"p-parabolic ({self.by})"
        return f"inconclusive ({self.reason.code})"

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "by": self.by,
            "reason": self.reason.to_dict() if self.reason else None,
            "p": self.p,
            "rho": self.rho,
            "balance": self.balance.to_dict() if self.balance else None,
            "tail": self.tail.to_dict() if self.tail else None,
            "certified_interval": list(self.certified_interval)
            if self.certified_interval else None,
            "warnings": list(self.warnings),
            "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in self.checks],
        }


def _model_warnings(c: Constellation, cfg: ClassifyConfig, rho: float,
                    horizon: float) -> tuple:
    if not cfg.validate_model:
        return ()
    warnings = []
    report = validate_warping(c.model.w, r_max=max(10.0, 4.0 * rho))
    for cond, witness, value in report.violations:
        warnings.append(f"warping check failed: {cond} (r={witness:g}, value={value!r})")
    if c.tangency is Tangency.LOWER:
        rs = np.geomspace(cfg.lo(rho), min(horizon, 1e6), 256)
        try:
            gv = np.asarray(evaluate(c.g, rs))
            if np.any(gv > 1.0 + 1e-12):
                warnings.append("tangency lower bound g exceeds 1 on the grid")
            if np.any(gv <= 0.0):
                warnings.append("tangency lower bound g is not positive on the grid")
        except RadialCapError as exc:
            warnings.append(f"tangency bound not evaluable: {exc}")
    return tuple(warnings)


def _certified_horizon(c: Constellation, p: float, rho: float,
                       cfg: ClassifyConfig):
    """Largest doubling radius at which the balance is still evaluable.

    Hyperbolic-type expressions overflow float range near r ~ 700 (inf/inf
    ratios); the hypothesis grid and the tail ladder are then capped there
    and the verdict says so.  Returns ``(radius, doubling count, warnings)``.
    """
    last_exc = None
    for k in range(cfg.tail.k_max, -1, -1):
        hi = rho * 2.0 ** k
        try:
            value, _ = _balance_terms(c, p, hi)
            if np.isfinite(value):
                warning = () if k == cfg.tail.k_max else (
                    f"balance evaluable only up to r={hi:.4g} "
                    f"(float overflow beyond); hypotheses certified there",)
                return hi, k, warning
        except DomainError as exc:
            last_exc = exc
    raise last_exc if last_exc is not None else DomainError(
        "balance not evaluable anywhere on the grid", rho)


def _balance_violations(prof: BalanceProfile, want: str) -> tuple:
    """Up to 5 grid points where the required sign fails."""
    if want == "non_negative":
        bad = prof.values < -prof.zero_tol
    else:
        bad = prof.values > prof.zero_tol
    return tuple(float(r) for r in prof.rs[bad][:5])


def classify(c: Constellation, p: float, rho: float,
             cfg: Optional[ClassifyConfig] = None) -> Verdict:
    """Apply the tangency-matching main criterion at exponent p.

    Lower tangency: balance must be non-negative on the certified grid and
    the weight integral must diverge.  Upper tangency: balance non-positive,
    weight taken with g == 1.  The verdict is invariant under changes of the
    base point rho (the weight rescales by a positive constant).
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    cfg = cfg or ClassifyConfig()
    if p < 2:
        return Verdict("inconclusive", p=p, rho=rho,
                       reason=InconclusiveReason(
                           "p_below_2", message="criteria assume p >= 2"))
    hi, k_cert, horizon_warnings = _certified_horizon(c, p, rho, cfg)
    warnings = _model_warnings(c, cfg, rho, hi) + horizon_warnings
    interval = (cfg.lo(rho), hi)
    tail_cfg = replace(cfg.tail, k_max=min(cfg.tail.k_max, k_cert))
    prof = balance_sign(c, p, interval, cfg.grid_points)

    if c.tangency is Tangency.LOWER:
        needed, by = "non_negative", THEOREM_LOWER
        ok = prof.is_non_negative
    else:
        needed, by = "non_positive", THEOREM_UPPER
        ok = prof.is_non_positive
    if not ok:
        return Verdict("inconclusive", p=p, rho=rho, balance=prof,
                       certified_interval=interval, warnings=warnings,
                       reason=InconclusiveReason(
                           "balance_fails",
                           message=f"balance is not {needed} on the certified grid",
                           witnesses=_balance_violations(prof, needed)))

    weight = weight_function(c, p, rho, rel_tol=cfg.weight_rel_tol)
    tail = classify_tail(weight, rho, tail_cfg)
    if tail.is_divergent:
        return Verdict("p_parabolic", p=p, rho=rho, by=by, balance=prof, tail=tail,
                       certified_interval=interval, warnings=warnings)
    if tail.is_convergent:
        reason = InconclusiveReason("tail_convergent", value=tail.value,
                                    message="weight integral converges; criterion silent")
    else:
        reason = InconclusiveReason("tail_undetermined",
                                    message="tail at the critical exponent; not guessed")
    return Verdict("inconclusive", p=p, rho=rho, balance=prof, tail=tail,
                   certified_interval=interval, warnings=warnings, reason=reason)


def classify_bounded_w(c: Constellation, p: float, rho: float, r0: float,
                       lower_const: float,
                       cfg: Optional[ClassifyConfig] = None) -> Verdict:
    """Shortcut criterion: non-positive balance plus a warping bounded below
    by ``lower_const > 0`` on ``[r0, horizon]`` certifies p-parabolicity with
    no tail quadrature (the weight dominates w, so its integral diverges)."""
    if c.tangency is not Tangency.UPPER:
        raise ValueError("bounded-warping corollary needs an upper-tangency constellation")
    if lower_const <= 0:
        raise ValueError("lower_const must be positive")
    if rho <= 0 or r0 <= 0:
        raise ValueError("rho and r0 must be positive")
    cfg = cfg or ClassifyConfig()
    if p < 2:
        return Verdict("inconclusive", p=p, rho=rho,
                       reason=InconclusiveReason("p_below_2",
                                                 message="criteria assume p >= 2"))
    hi, _, horizon_warnings = _certified_horizon(c, p, rho, cfg)
    warnings = _model_warnings(c, cfg, rho, hi) + horizon_warnings
    interval = (cfg.lo(rho), hi)
    prof = balance_sign(c, p, interval, cfg.grid_points)
    checks = []
    if not prof.is_non_positive:
        return Verdict("inconclusive", p=p, rho=rho, balance=prof,
                       certified_interval=interval, warnings=warnings,
                       reason=InconclusiveReason(
                           "balance_fails",
                           message="balance is not non-positive on the certified grid",
                           witnesses=_balance_violations(prof, "non_positive")))
    checks.append(("balance_non_positive", True, "certified on grid"))

    grid = np.geomspace(r0, max(hi, 2.0 * r0), 1024)
    wv = np.asarray(evaluate(c.model.w, grid))
    low = wv >= lower_const
    if not np.all(low):
        i = int(np.argmax(~low))
        return Verdict("inconclusive", p=p, rho=rho, balance=prof,
                       certified_interval=interval, warnings=warnings,
                       checks=tuple(checks),
                       reason=InconclusiveReason(
                           "balance_fails",
                           message=f"warping drops below {lower_const:g} "
                                   f"(w({grid[i]:.6g}) = {wv[i]:.6g})",
                           witnesses=(float(grid[i]),)))
    checks.append(("warping_bounded_below", True,
                   f"w >= {lower_const:g} on [{r0:g}, {max(hi, 2.0 * r0):.3g}]"))
    return Verdict("p_parabolic", p=p, rho=rho, by=COR_BOUNDED_W, balance=prof,
                   certified_interval=interval, warnings=warnings, checks=tuple(checks))


def classify_monotone(c: Constellation, q: float, p: float, rho: float,
                      cfg: Optional[ClassifyConfig] = None) -> Verdict:
    """Monotonicity criterion: if the balance at exponent q is non-positive,
    ``h <= w'/w <= lam`` holds, and the q-weight integral diverges, then the
    submanifold is p-parabolic for every ``p >= q``.

    Internally also asserts the comparisons the proof relies on
    (balance and weight monotonicity between q and p)."""
    if c.tangency is not Tangency.UPPER:
        raise ValueError("monotone corollary needs an upper-tangency constellation")
    if p < q:
        raise ValueError(f"need q <= p, got q={q}, p={p}")
    if rho <= 0:
        raise ValueError("rho must be positive")
    cfg = cfg or ClassifyConfig()
    if q < 2:
        return Verdict("inconclusive", p=p, rho=rho,
                       reason=InconclusiveReason("p_below_2",
                                                 message="criteria assume q >= 2"))
    hi, k_cert, horizon_warnings = _certified_horizon(c, q, rho, cfg)
    warnings = _model_warnings(c, cfg, rho, hi) + horizon_warnings
    interval = (cfg.lo(rho), hi)
    tail_cfg = replace(cfg.tail, k_max=min(cfg.tail.k_max, k_cert))
    rs = np.geomspace(interval[0], interval[1], cfg.grid_points)
    jw = eval_jet2(c.model.w, rs)
    et = np.asarray(jw.d1 / jw.value)
    hv = np.asarray(evaluate(c.h, rs))
    lv = np.asarray(evaluate(c.lam, rs))
    tol = 1e-12 * np.maximum(1.0, np.abs(et) + np.abs(hv) + np.abs(lv))
    sandwich_ok = np.all(hv <= et + tol) and np.all(et <= lv + tol)
    checks = [("sandwich_h_eta_lam", bool(sandwich_ok),
               "h <= w'/w <= lam on certified grid")]
    if not sandwich_ok:
        bad = ~((hv <= et + tol) & (et <= lv + tol))
        return Verdict("inconclusive", p=p, rho=rho, certified_interval=interval,
                       warnings=warnings, checks=tuple(checks),
                       reason=InconclusiveReason(
                           "balance_fails",
                           message="sandwich h <= w'/w <= lam fails on the grid",
                           witnesses=tuple(float(r) for r in rs[bad][:5])))

    prof_q = balance_sign(c, q, interval, cfg.grid_points)
    if not prof_q.is_non_positive:
        return Verdict("inconclusive", p=p, rho=rho, balance=prof_q,
                       certified_interval=interval, warnings=warnings,
                       checks=tuple(checks),
                       reason=InconclusiveReason(
                           "balance_fails",
                           message=f"balance at q={q} is not non-positive",
                           witnesses=_balance_violations(prof_q, "non_positive")))
    checks.append((f"balance_non_positive_at_q={q:g}", True, "certified on grid"))

    # proof-level comparisons, asserted numerically
    prof_p = balance_sign(c, p, interval, cfg.grid_points)
    mono_tol = 1e-10 * np.maximum(1.0, np.abs(prof_q.values))
    if not np.all(prof_p.values <= prof_q.values + mono_tol):
        raise RadialCapError("internal assertion failed: balance not monotone in p")
    checks.append(("balance_monotone_p_vs_q", True, "pointwise on grid"))

    weight_q = weight_function(c, q, rho, rel_tol=cfg.weight_rel_tol)
    if p > q:
        weight_p = weight_function(c, p, rho, rel_tol=cfg.weight_rel_tol)
        prim_q = CumulativeCache(weight_q, rho, rel_tol=cfg.weight_rel_tol)
        prim_p = CumulativeCache(weight_p, rho, rel_tol=cfg.weight_rel_tol)
        for k in (3, 6):
            horizon_k = rho * 2.0 ** k
            if prim_p(horizon_k) < prim_q(horizon_k) * (1.0 - 1e-9):
                raise RadialCapError(
                    "internal assertion failed: weight integral not monotone in p")
        checks.append(("weight_integral_monotone", True,
                       "finite horizons 8x and 64x rho"))

    tail = classify_tail(weight_q, rho, tail_cfg)
    if tail.is_divergent:
        return Verdict("p_parabolic", p=p, rho=rho, by=COR_MONOTONE, balance=prof_q,
                       tail=tail, certified_interval=interval, warnings=warnings,
                       checks=tuple(checks))
    if tail.is_convergent:
        reason = InconclusiveReason("tail_convergent", value=tail.value,
                                    message=f"q={q} weight integral converges")
    else:
        reason = InconclusiveReason("tail_undetermined",
                                    message=f"q={q} weight tail at the critical exponent")
    return Verdict("inconclusive", p=p, rho=rho, balance=prof_q, tail=tail,
                   certified_interval=interval, warnings=warnings,
                   checks=tuple(checks), reason=reason)


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    p: float
    verdict: Optional[Verdict]
    error: Optional[str]
    alpha_hat: Optional[float]
    cap_at_horizon: Optional[float]

    @property
    def outcome(self) -> str:
        return self.verdict.outcome if self.verdict else "error"


def sweep(c: Constellation, p_from: float, p_to: float, p_step: float, rho: float,
          cfg: Optional[ClassifyConfig] = None, workers: Optional[int] = None,
          cap_horizon_doublings: int = 10) -> list:
    """Classify across a grid of exponents; one row per p, failures recorded
    per row without aborting the sweep.  Rows are gathered in input order and
    the result is deterministic for a fixed config regardless of worker
    count."""
    if p_step <= 0:
        raise ValueError("p_step must be positive")
    if p_to < p_from:
        raise ValueError("empty sweep range")
    cfg = cfg or ClassifyConfig()
    ps = [round(p_from + i * p_step, 12)
          for i in range(int(np.floor((p_to - p_from) / p_step + 1e-9)) + 1)]
    r_cap = rho * 2.0 ** cap_horizon_doublings

    def run_one(p: float) -> SweepRow:
        try:
            verdict = classify(c, p, rho, cfg)
            alpha = verdict.tail.alpha_hat if verdict.tail else None
            cap = None
            if p >= 2:
                # keep the capacity horizon inside the evaluable range
                hi = r_cap
                if verdict.certified_interval is not None:
                    hi = min(hi, verdict.certified_interval[1])
                cap = drifted_capacity(c, p, rho, hi, rel_tol=1e-9)
            return SweepRow(p=p, verdict=verdict, error=None,
                            alpha_hat=alpha, cap_at_horizon=cap)
        except RadialCapError as exc:
            return SweepRow(p=p, verdict=None, error=str(exc),
                            alpha_hat=None, cap_at_horizon=None)

    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(ps) == 1:
        return [run_one(p) for p in ps]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(run_one, ps))
