"""Drifted radial operator, its annulus Dirichlet solution and capacities.

The operator acting on radial profiles is

    L psi = psi'' + c(r) psi',
    c(r)  = balance(r) / ((p-1) g(r)^2) - w'(r)/w(r)

(upper tangency: g == 1).  Its Dirichlet solution on the annulus
``[rho, R]`` with values 0 and 1 on the boundary spheres is the normalized
primitive of the decision weight:

    psi(r) = integral_rho^r weight / integral_rho^R weight

The module provides the closed form, an independent Runge-Kutta solution of
the same boundary problem, the flux ("drifted") capacity of the annulus and
the induced capacity upper bound for the submanifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .constellation import Constellation, Tangency, WeightFunction, _balance_terms, weight_function
from .errors import RadialCapError
from .expr import eval_jet2
from .model import sphere_volume
from .quadrature import CumulativeCache, _as_array_fn

__all__ = [
    "DriftOperator",
    "RadialSolution",
    "OdeSolution",
    "solve_dirichlet_closed",
    "solve_dirichlet_ode",
    "drifted_capacity",
    "capacity_upper_bound",
    "operator_residual",
]


@dataclass(frozen=True)
class DriftOperator:
    """First-order coefficient of the drifted radial operator."""

    constellation: Constellation
    p: float

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"p must be >= 2, got {self.p}")

    def coeff(self, r) -> Union[float, np.ndarray]:
        """c(r) = balance/((p-1) g^2) - w'/w."""
        c = self.constellation
        value, _ = _balance_terms(c, self.p, r)
        jw = eval_jet2(c.model.w, r)
        et = jw.d1 / jw.value
        if c.tangency is Tangency.LOWER:
            gv = np.asarray(eval_jet2(c.g, r).value)
            return value / ((self.p - 1.0) * gv * gv) - et
        return value / (self.p - 1.0) - et

    def apply(self, profile: Callable, r, fd_step: float) -> Union[float, np.ndarray]:
        """L profile at r via 5-point central differences on the profile."""
        prof = _as_array_fn(profile)
        pts = np.atleast_1d(np.asarray(r, dtype=float))
        h = fd_step
        stencil = pts[:, None] + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])[None, :]
        order = np.argsort(stencil.ravel(), kind="stable")
        flat = stencil.ravel()[order]
        vals_sorted = prof(flat)
        vals = np.empty_like(vals_sorted)
        vals[order] = vals_sorted
        f = vals.reshape(stencil.shape)
        d1 = (-f[:, 4] + 8.0 * f[:, 3] - 8.0 * f[:, 1] + f[:, 0]) / (12.0 * h)
        d2 = (-f[:, 4] + 16.0 * f[:, 3] - 30.0 * f[:, 2] + 16.0 * f[:, 1] - f[:, 0]) / (12.0 * h * h)
        out = d2 + np.asarray(self.coeff(pts)) * d1
        return float(out[0]) if np.ndim(r) == 0 else out


class RadialSolution:
    """Closed-form Dirichlet solution on the annulus ``[rho, R]``.

    ``profile(r)`` is exact 0 at rho and exact 1 at R by construction;
    ``derivative(r)`` is the weight over the normalizer, hence nonnegative.
    """

    def __init__(self, weight: WeightFunction, rho: float, R: float,
                 rel_tol: float = 1e-11):
        self.weight = weight
        self.rho = float(rho)
        self.R = float(R)
        self.p = weight.p
        self._primitive = CumulativeCache(weight, self.rho, rel_tol=rel_tol)
        self.normalizer = float(self._primitive(self.R))
        if not (self.normalizer > 0.0) or not math.isfinite(self.normalizer):
            raise RadialCapError(
                f"weight integral over [{rho}, {R}] is {self.normalizer}; no solution")

    def profile(self, r):
        vals = self._primitive(r) / self.normalizer
        return vals

    def derivative(self, r):
        return self.weight(r) / self.normalizer

    def __repr__(self):
        return (f"RadialSolution(rho={self.rho}, R={self.R}, p={self.p}, "
                f"normalizer={self.normalizer:.6g})")


def solve_dirichlet_closed(c: Constellation, p: float, rho: float, R: float,
                           rel_tol: float = 1e-11) -> RadialSolution:
    """Explicit Dirichlet solution: normalized primitive of the weight."""
    if not (0 < rho < R):
        raise ValueError(f"need 0 < rho < R, got rho={rho}, R={R}")
    wf = weight_function(c, p, rho, rel_tol=rel_tol)
    return RadialSolution(wf, rho, R, rel_tol=rel_tol)


@dataclass(frozen=True)
class OdeSolution:
    """Runge-Kutta solution samples at uniform nodes over ``[rho, R]``."""

    rho: float
    R: float
    p: float
    nodes: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray

    def profile(self, r):
        """Cubic Hermite interpolation through the stored samples."""
        pts = np.atleast_1d(np.asarray(r, dtype=float))
        h = self.nodes[1] - self.nodes[0]
        i = np.clip(((pts - self.rho) / h).astype(int), 0, len(self.nodes) - 2)
        t = (pts - self.nodes[i]) / h
        h00 = (1.0 + 2.0 * t) * (1.0 - t) ** 2
        h10 = t * (1.0 - t) ** 2
        h01 = t * t * (3.0 - 2.0 * t)
        h11 = t * t * (t - 1.0)
        out = (h00 * self.psi[i] + h10 * h * self.dpsi[i]
               + h01 * self.psi[i + 1] + h11 * h * self.dpsi[i + 1])
        return float(out[0]) if np.ndim(r) == 0 else out


def solve_dirichlet_ode(c: Constellation, p: float, rho: float, R: float,
                        step_count: int = 2000) -> OdeSolution:
    """Integrate ``psi'' = -c(r) psi'`` from ``(psi, psi') = (0, 1)`` at rho
    with classical 4th-order Runge-Kutta, then rescale by ``psi(R)``.

    Instead of erroring out when the raw solution grows past float range,
    the linear system is renormalized on the fly (a per-node log-scale is
    carried and cancels in the final rescaling).
    """
    if not (0 < rho < R):
        raise ValueError(f"need 0 < rho < R, got rho={rho}, R={R}")
    if step_count < 100:
        raise ValueError("step_count must be at least 100")
    op = DriftOperator(c, p)
    n = int(step_count)
    h = (R - rho) / n
    nodes = rho + h * np.arange(n + 1)
    mids = rho + h * (np.arange(n) + 0.5)
    c_all = np.asarray(op.coeff(np.concatenate([nodes, mids])))
    c_nodes, c_mids = c_all[:n + 1], c_all[n + 1:]

    psi_hat = np.empty(n + 1)
    v_hat = np.empty(n + 1)
    log_scale = np.empty(n + 1)
    psi, v, ls = 0.0, 1.0, 0.0
    psi_hat[0], v_hat[0], log_scale[0] = psi, v, ls
    for i in range(n):
        c0, cm, c1 = c_nodes[i], c_mids[i], c_nodes[i + 1]
        k1p, k1v = v, -c0 * v
        y = v + 0.5 * h * k1v
        k2p, k2v = y, -cm * y
        y = v + 0.5 * h * k2v
        k3p, k3v = y, -cm * y
        y = v + h * k3v
        k4p, k4v = y, -c1 * y
        psi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        m = max(abs(psi), abs(v))
        if m > 1e100:
            psi /= m
            v /= m
            ls += math.log(m)
        psi_hat[i + 1], v_hat[i + 1], log_scale[i + 1] = psi, v, ls

    if psi_hat[-1] == 0.0:
        raise RadialCapError("degenerate profile: psi(R) vanished")
    rescale = np.exp(log_scale - log_scale[-1]) / psi_hat[-1]
    return OdeSolution(rho=rho, R=R, p=p, nodes=nodes,
                       psi=psi_hat * rescale, dpsi=v_hat * rescale)


def drifted_capacity(c: Constellation, p: float, rho: float, R: float,
                     rel_tol: float = 1e-11) -> float:
    """Flux capacity of the annulus for the drifted operator:

        Vol(sphere_rho) * weight(rho) / integral_rho^R weight

    which equals ``Vol(sphere_rho) * psi'(rho)`` of the Dirichlet solution.
    """
    sol = solve_dirichlet_closed(c, p, rho, R, rel_tol=rel_tol)
    return float(sphere_volume(c.model, rho) * sol.derivative(rho))


def capacity_upper_bound(c: Constellation, p: float, rho: float, R: float,
                         boundary_flux: float = 1.0, rel_tol: float = 1e-11) -> float:
    """Upper bound for the submanifold's annulus p-capacity:

        boundary_flux * (drifted_capacity / Vol(sphere_rho))**(p-1)

    ``boundary_flux`` is the integral of the (p-1)-th power of the radial
    tangency over the inner boundary; it depends on the actual immersion and
    is supplied by the caller (any positive value keeps the bound's decisive
    R -> infinity behavior).
    """
    if not (boundary_flux > 0):
        raise ValueError(f"boundary_flux must be positive, got {boundary_flux}")
    cap = drifted_capacity(c, p, rho, R, rel_tol=rel_tol)
    vol = float(sphere_volume(c.model, rho))
    return boundary_flux * (cap / vol) ** (p - 1.0)


def operator_residual(c: Constellation, p: float, rho: float, R: float,
                      solution, probe_points: Optional[np.ndarray] = None,
                      fd_step: Optional[float] = None) -> float:
    """Max |psi'' + c psi'| over probe points, via finite differences on the
    profile (independent of how the profile was produced).

    Defaults to 257 Chebyshev-distributed nodes pulled slightly inside the
    annulus so the 5-point stencil stays in range.
    """
    profile = solution.profile if hasattr(solution, "profile") else solution
    h = fd_step if fd_step is not None else min(2e-4 * (R - rho), 0.02 * rho)
    if probe_points is None:
        k = np.arange(257)
        cheb = np.cos(math.pi * k / 256.0)  # [-1, 1]
        lo, hi = rho + 2.5 * h, R - 2.5 * h
        probe_points = (lo + hi) / 2.0 + (hi - lo) / 2.0 * cheb[::-1]
    op = DriftOperator(c, p)
    res = op.apply(profile, np.asarray(probe_points, dtype=float), h)
    return float(np.max(np.abs(res)))
