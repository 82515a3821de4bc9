"""Comparison constellations: the submanifold-vs-model datum and the
quantities the parabolicity criteria are built from.

A constellation bundles the ambient dimension ``n``, the submanifold
dimension ``m`` with its model geometry, and radial lower-bound functions:
``g`` for the tangency (norm of the projected radial gradient), ``lam`` for
the radial second-fundamental-form component and ``h`` for the radial mean
convexity.  In upper-tangency mode ``g`` plays no role and is fixed to 1.

The balance function combines them as

    (m + p - 2) * w'(r)/w(r) - m*h(r) - (p - 2)*lam(r)

and the decision weight is ``w(r) * exp(-integral_rho^r balance/((p-1) g^2))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DomainError
from .expr import RadialExpr, eval_jet2, evaluate, parse
from .model import ModelSpace
from .quadrature import CumulativeCache

__all__ = [
    "Tangency",
    "Constellation",
    "BalanceProfile",
    "balance",
    "balance_sign",
    "lambda_weight",
    "weight_function",
    "balance_shift_identity_check",
    "WeightFunction",
]

_G_FLOOR = 1e-8


class Tangency(enum.Enum):
    """Which side of the tangency the constellation controls."""

    LOWER = "lower"
    UPPER = "upper"


def _as_expr(e: Union[str, RadialExpr]) -> RadialExpr:
    return e if isinstance(e, RadialExpr) else parse(e)


@dataclass(frozen=True)
class Constellation:
    """Full comparison-constellation datum.

    Immutable; all derived computations are pure functions of it.
    """

    n: int
    m: int
    model: ModelSpace
    g: RadialExpr
    lam: RadialExpr
    h: RadialExpr
    tangency: Tangency

    def __post_init__(self):
        tang = self.tangency
        if isinstance(tang, str):
            tang = Tangency(tang)
        object.__setattr__(self, "tangency", tang)
        object.__setattr__(self, "g", _as_expr("1" if tang is Tangency.UPPER else self.g))
        object.__setattr__(self, "lam", _as_expr(self.lam))
        object.__setattr__(self, "h", _as_expr(self.h))
        if not (2 <= self.m <= self.n):
            raise ValueError(f"need 2 <= m <= n, got m={self.m}, n={self.n}")
        if self.model.m != self.m:
            raise ValueError(f"model dimension {self.model.m} != m={self.m}")

    @classmethod
    def from_functions(cls, n: int, m: int, w: Union[str, RadialExpr],
                       g: Union[str, RadialExpr] = "1",
                       lam: Union[str, RadialExpr] = "0",
                       h: Union[str, RadialExpr] = "0",
                       tangency: Union[str, Tangency] = Tangency.LOWER) -> "Constellation":
        return cls(n=n, m=m, model=ModelSpace(m, _as_expr(w)), g=_as_expr(g),
                   lam=_as_expr(lam), h=_as_expr(h), tangency=tangency)

    @classmethod
    def self_model(cls, ms: ModelSpace,
                   tangency: Union[str, Tangency] = Tangency.LOWER) -> "Constellation":
        """Degenerate case submanifold == model (g=1, lam=h=0); every formula
        collapses to classical radial potential theory."""
        return cls(n=ms.m, m=ms.m, model=ms, g=parse("1"), lam=parse("0"),
                   h=parse("0"), tangency=tangency)

    def is_self_model(self, grid: Optional[np.ndarray] = None) -> bool:
        """Numerically detect the degenerate submanifold == model case."""
        rs = grid if grid is not None else np.geomspace(0.1, 10.0, 17)
        try:
            gv = np.asarray(evaluate(self.g, rs))
            lv = np.asarray(evaluate(self.lam, rs))
            hv = np.asarray(evaluate(self.h, rs))
        except DomainError:
            return False
        return bool(np.all(gv == 1.0) and np.all(lv == 0.0) and np.all(hv == 0.0))


def _balance_terms(c: Constellation, p: float, r):
    """Balance value together with the magnitude scale of its terms."""
    jw = eval_jet2(c.model.w, r)
    if np.any(np.asarray(jw.value) == 0.0):
        raise DomainError("warping function vanishes", r)
    et = jw.d1 / jw.value
    t1 = (c.m + p - 2.0) * et
    t2 = c.m * evaluate(c.h, r)
    if p == 2.0:
        # the lam term carries the factor (p - 2) = 0: skip evaluation
        # entirely so outcomes are exactly lam-independent at p = 2
        value = t1 - t2
        scale = np.abs(t1) + np.abs(t2)
    else:
        t3 = (p - 2.0) * evaluate(c.lam, r)
        value = t1 - t2 - t3
        scale = np.abs(t1) + np.abs(t2) + np.abs(t3)
    return value, scale


def balance(c: Constellation, p: float, r) -> Union[float, np.ndarray]:
    """Balance function ``(m+p-2) w'/w - m h - (p-2) lam`` at radius r.

    At ``p = 2`` the ``lam`` term has coefficient zero and is not evaluated.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    value, _ = _balance_terms(c, p, r)
    return value


@dataclass(frozen=True)
class BalanceProfile:
    """Sampled balance function with its sign classification.

    Values within ``1e-12`` of zero (relative to the local term magnitude)
    count as zero, so an identically-zero balance is simultaneously
    non-negative and non-positive.
    """

    p: float
    rs: np.ndarray
    values: np.ndarray
    zero_tol: np.ndarray
    witnesses: tuple = field(default_factory=tuple)

    @property
    def is_non_negative(self) -> bool:
        return bool(np.all(self.values >= -self.zero_tol))

    @property
    def is_non_positive(self) -> bool:
        return bool(np.all(self.values <= self.zero_tol))

    @property
    def sign_summary(self) -> str:
        if self.is_non_negative:
            return "non_negative"
        if self.is_non_positive:
            return "non_positive"
        return "mixed"

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "sign": self.sign_summary,
            "grid": [float(self.rs[0]), float(self.rs[-1]), int(len(self.rs))],
            "min": float(np.min(self.values)),
            "max": float(np.max(self.values)),
            "witnesses": [float(w) for w in self.witnesses],
        }


def balance_sign(c: Constellation, p: float, interval, grid_size: int = 512) -> BalanceProfile:
    """Sample the balance function on a geometric grid over ``interval``
    and classify its sign, recording up to 5 sign-change witnesses."""
    lo, hi = interval
    if not (0 < lo < hi):
        raise ValueError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    rs = np.geomspace(lo, hi, grid_size)
    values, scale = _balance_terms(c, p, rs)
    values = np.asarray(values, dtype=float)
    tol = 1e-12 * np.maximum(1.0, np.asarray(scale, dtype=float))
    sign = np.where(values > tol, 1, np.where(values < -tol, -1, 0))
    witnesses = []
    nonzero = np.nonzero(sign)[0]
    for a, b in zip(nonzero, nonzero[1:]):
        if sign[a] != sign[b]:
            witnesses.append(float(np.sqrt(rs[a] * rs[b])))
            if len(witnesses) >= 5:
                break
    return BalanceProfile(p=p, rs=rs, values=values, zero_tol=tol,
                          witnesses=tuple(witnesses))


class WeightFunction:
    """Callable ``r -> w(r) * exp(-I(r))`` with
    ``I(r) = integral_rho^r balance(t) / ((p-1) g(t)^2) dt``.

    Evaluations maintain a monotone checkpoint cache of the inner integral,
    so batched ascending queries (the common access pattern of the tail
    classifier and the Dirichlet solver) cost one short quadrature per gap.
    Instances are cheap to build and not safe for concurrent mutation;
    build one per thread.
    """

    def __init__(self, c: Constellation, p: float, rho: float, rel_tol: float = 1e-10):
        if p < 2:
            raise ValueError(f"p must be >= 2, got {p}")
        if rho <= 0:
            raise ValueError(f"rho must be positive, got {rho}")
        self.constellation = c
        self.p = p
        self.rho = float(rho)
        self.rel_tol = rel_tol
        # the inner integral sits in an exponent: absolute errors below
        # 1e-15 per gap are invisible, and the floor keeps roundoff-noise
        # integrands (exactly cancelling balances) from endless refinement
        self._cache = CumulativeCache(self.integrand, self.rho,
                                      rel_tol=rel_tol, abs_tol=1e-15)

    # -- integrand of the inner integral ------------------------------------
    def integrand(self, t):
        c = self.constellation
        value, _ = _balance_terms(c, self.p, t)
        if c.tangency is Tangency.LOWER:
            gv = np.asarray(evaluate(c.g, t))
            if np.any(gv < _G_FLOOR):
                bad = np.asarray(gv < _G_FLOOR)
                r_bad = t if np.ndim(t) == 0 else np.asarray(t)[np.argmax(bad)]
                raise DomainError(f"tangency bound g below {_G_FLOOR:g}", float(r_bad))
            return value / ((self.p - 1.0) * gv * gv)
        return value / (self.p - 1.0)

    def inner_integral(self, r):
        """I(r) for scalar or ndarray r >= rho."""
        try:
            return self._cache(r)
        except ValueError:
            raise ValueError(f"weight is based at rho={self.rho}; query below it") from None

    def __call__(self, r):
        wv = evaluate(self.constellation.model.w, r)
        return wv * np.exp(-self.inner_integral(r))


def weight_function(c: Constellation, p: float, rho: float,
                    rel_tol: float = 1e-10) -> WeightFunction:
    """Build the decision weight based at ``rho`` (upper tangency uses
    ``g == 1`` by construction)."""
    return WeightFunction(c, p, rho, rel_tol=rel_tol)


def lambda_weight(c: Constellation, p: float, rho: float, r,
                  rel_tol: float = 1e-10) -> Union[float, np.ndarray]:
    """Weight value ``w(r) * exp(-integral_rho^r balance/((p-1) g^2))``.

    ``lambda_weight(c, p, rho, rho)`` equals ``w(rho)`` exactly (empty
    integral).  For repeated queries against one base point build a
    :class:`WeightFunction` instead.
    """
    return weight_function(c, p, rho, rel_tol=rel_tol)(r)


def balance_shift_identity_check(c: Constellation, p: float, q: float, grid) -> float:
    """Max relative deviation over the grid of the shift identity

        balance_p(r) - balance_q(r) == (p - q) * (w'/w - lam)(r)

    Relative means measured against ``1 + |balance_p| + |balance_q|``.
    """
    if p < 2 or q < 2:
        raise ValueError("p and q must be >= 2")
    rs = np.asarray(grid, dtype=float)
    jw = eval_jet2(c.model.w, rs)
    et = jw.d1 / jw.value
    lam_v = np.asarray(eval_jet2(c.lam, rs).value)
    bp, _ = _balance_terms(c, p, rs)
    bq, _ = _balance_terms(c, q, rs)
    # evaluate the p=2 lam term explicitly for the identity even though
    # balance() elides it: the elision is exactly a zero coefficient
    dev = np.abs(bp - bq - (p - q) * (et - lam_v))
    rel = dev / (1.0 + np.abs(bp) + np.abs(bq))
    return float(np.max(rel))
