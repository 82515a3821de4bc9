"""Rotationally symmetric model geometry: a dimension together with a
warping function ``w`` of the radial distance.

Houses the mean curvature of distance spheres ``w'(r)/w(r)``, the radial
sectional curvature ``-w''(r)/w(r)``, sphere volumes and the exact radial
annulus capacities that serve as closed-form oracles for everything built
on top.  Instances are immutable and all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError
from .expr import RadialExpr, eval_jet2, parse
from .quadrature import integrate

__all__ = [
    "ModelSpace",
    "ValidationReport",
    "validate_warping",
    "eta",
    "radial_curvature",
    "sphere_volume",
    "unit_sphere_volume",
    "p_laplacian_radial",
    "exact_annulus_p_capacity",
]


def _as_expr(w: Union[str, RadialExpr]) -> RadialExpr:
    return w if isinstance(w, RadialExpr) else parse(w)


@dataclass(frozen=True)
class ModelSpace:
    """Dimension ``m >= 2`` with warping function ``w``.

    A valid warping satisfies ``w(0) = 0``, ``w'(0) = 1`` and ``w > 0`` for
    ``r > 0`` (checked numerically by :func:`validate_warping`; the
    constructor does not enforce it so that annulus-only computations on
    non-model warpings remain possible).
    """

    m: int
    w: RadialExpr

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "w", _as_expr(self.w))

    @classmethod
    def euclidean(cls, m: int) -> "ModelSpace":
        return cls(m, parse("r"))

    @classmethod
    def hyperbolic(cls, m: int) -> "ModelSpace":
        return cls(m, parse("sinh(r)"))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the warping-function checks; failures carry witnesses."""

    ok: bool
    violations: tuple = field(default_factory=tuple)  # (condition, witness_r, value)

    def __bool__(self) -> bool:
        return self.ok


def validate_warping(w: Union[str, RadialExpr], r_max: float = 20.0) -> ValidationReport:
    """Check ``w(0)=0``, ``w'(0)=1`` (sampled at 1e-6, tolerance 1e-4) and
    positivity of ``w`` on a 1024-point geometric grid in ``(1e-6, r_max]``.
    """
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    w = _as_expr(w)
    violations = []
    eps = 1e-6
    try:
        j0 = eval_jet2(w, eps)
        if abs(j0.value) > 1e-4:
            violations.append(("w(0) = 0", eps, float(j0.value)))
        if abs(j0.d1 - 1.0) > 1e-4:
            violations.append(("w'(0) = 1", eps, float(j0.d1)))
        grid = np.geomspace(eps, r_max, 1024)
        vals = np.asarray(eval_jet2(w, grid).value)
        bad = ~(vals > 0.0)
        if bad.any():
            i = int(np.argmax(bad))
            violations.append(("w > 0 on (0, r_max]", float(grid[i]), float(vals[i])))
    except DomainError as exc:
        violations.append(("w evaluable on (0, r_max]", exc.r, None))
    return ValidationReport(ok=not violations, violations=tuple(violations))


def eta(ms: ModelSpace, r) -> Union[float, np.ndarray]:
    """Mean curvature ``w'(r)/w(r)`` of the distance sphere of radius r."""
    j = eval_jet2(ms.w, r)
    if np.any(np.asarray(j.value) == 0.0):
        raise DomainError("warping function vanishes", r)
    return j.d1 / j.value


def radial_curvature(ms: ModelSpace, r) -> Union[float, np.ndarray]:
    """Radial sectional curvature ``-w''(r)/w(r)`` at distance r."""
    j = eval_jet2(ms.w, r)
    if np.any(np.asarray(j.value) == 0.0):
        raise DomainError("warping function vanishes", r)
    return -j.d2 / j.value


def unit_sphere_volume(m: int) -> float:
    """Volume of the unit (m-1)-sphere, computed via log-gamma so large
    dimensions cannot overflow."""
    return math.exp(math.log(2.0) + 0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m))


def sphere_volume(ms: ModelSpace, r) -> Union[float, np.ndarray]:
    """Volume of the distance sphere: ``omega_{m-1} * w(r)**(m-1)``."""
    if np.any(np.asarray(r) <= 0):
        raise DomainError("radius must be positive", r)
    wv = eval_jet2(ms.w, r).value
    return unit_sphere_volume(ms.m) * np.power(wv, ms.m - 1)


def p_laplacian_radial(ms: ModelSpace, f: Union[str, RadialExpr], p: float, r):
    """Radial p-Laplacian on the model:

        |f'|**(p-2) * ((p-1) f'' + (m-1) (w'/w) f')

    ``p = 2`` short-circuits the degenerate factor to exactly 1; for
    ``p > 2`` a vanishing gradient returns 0 by continuous extension.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    f = _as_expr(f)
    jf = eval_jet2(f, r)
    et = eta(ms, r)
    core = (p - 1.0) * jf.d2 + (ms.m - 1.0) * et * jf.d1
    if p == 2.0:
        return core
    with np.errstate(all="ignore"):
        factor = np.where(jf.d1 == 0.0, 0.0, np.power(np.abs(jf.d1), p - 2.0))
    return factor * core


def exact_annulus_p_capacity(ms: ModelSpace, rho: float, R: float, p: float,
                             rel_tol: float = 1e-11) -> float:
    """Exact radial p-capacity of the annulus (closed ball of radius rho,
    ball of radius R):

        omega_{m-1} * (integral_rho^R w(t)**((1-m)/(p-1)) dt)**(1-p)

    Classical closed form; independent oracle for the drifted capacities.
    """
    if not (0 < rho < R):
        raise ValueError(f"need 0 < rho < R, got rho={rho}, R={R}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    expo = (1.0 - ms.m) / (p - 1.0)

    def integrand(t):
        wv = np.asarray(eval_jet2(ms.w, t).value)
        if np.any(wv <= 0.0):
            raise DomainError("warping function must be positive on [rho, R]", t)
        return np.power(wv, expo)

    total, _ = integrate(integrand, rho, R, rel_tol=rel_tol)
    return unit_sphere_volume(ms.m) * total ** (1.0 - p)
