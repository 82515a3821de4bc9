import math

import numpy as np
import pytest

from radialcap.constellation import Constellation, Tangency
from radialcap.dirichlet import (
    capacity_upper_bound, drifted_capacity, operator_residual,
    solve_dirichlet_closed, solve_dirichlet_ode,
)
from radialcap.model import ModelSpace, exact_annulus_p_capacity, sphere_volume


def euclid_self(m):
    return Constellation.self_model(ModelSpace.euclidean(m))


def zero_balance_constellation():
    """h = eta = 1 and lam = 1 cancel every balance term for any p, so the
    weight reduces to the warping itself (w = exp(r), valid on the annulus).
    """
    return Constellation.from_functions(2, 2, "exp(r)", h="1", lam="1",
                                        tangency=Tangency.UPPER)


def test_closed_solution_constant_weight_gives_linear_profile():
    # constant warping + zero balance: weight is constant, profile linear
    c = Constellation.from_functions(2, 2, "2", tangency=Tangency.UPPER)
    sol = solve_dirichlet_closed(c, 3.0, 1.0, 2.0)
    rs = np.linspace(1.0, 2.0, 21)
    assert np.max(np.abs(sol.profile(rs) - (rs - 1.0))) <= 1e-12
    ode = solve_dirichlet_ode(c, 3.0, 1.0, 2.0, step_count=500)
    assert np.max(np.abs(ode.psi - (ode.nodes - 1.0))) <= 1e-10
    # linear flux: capacity is boundary volume over annulus width
    vol = float(sphere_volume(c.model, 1.0))
    assert drifted_capacity(c, 3.0, 1.0, 2.0) == pytest.approx(vol / 1.0, rel=1e-10)
    assert drifted_capacity(c, 3.0, 1.0, 3.5) == pytest.approx(vol / 2.5, rel=1e-10)
    # linear profile: no truncation error, so a wide stencil leaves only
    # rounding noise far below 1e-10
    assert operator_residual(c, 3.0, 1.0, 2.0, sol, fd_step=0.01) <= 1e-10


def test_closed_solution_zero_balance_weight_is_warping():
    c = zero_balance_constellation()
    sol = solve_dirichlet_closed(c, 3.0, 1.0, 2.0)
    rs = np.linspace(1.0, 2.0, 21)
    expect = (np.exp(rs) - np.e) / (np.e * np.e - np.e)
    psi = sol.profile(rs)
    assert psi[0] == 0.0
    assert psi[-1] == 1.0
    assert np.all(np.diff(psi) > 0)
    assert np.max(np.abs(psi - expect)) <= 1e-9


def test_closed_solution_euclidean_m3():
    sol = solve_dirichlet_closed(euclid_self(3), 2.0, 1.0, 2.0)
    rs = np.linspace(1.0, 2.0, 33)
    expect = 2.0 * (1.0 - 1.0 / rs)
    assert np.max(np.abs(sol.profile(rs) - expect)) <= 1e-10
    assert sol.profile(1.0) == 0.0
    assert sol.profile(2.0) == 1.0


def test_ode_matches_closed_euclidean():
    c = euclid_self(3)
    sol = solve_dirichlet_closed(c, 2.0, 1.0, 2.0)
    ode = solve_dirichlet_ode(c, 2.0, 1.0, 2.0, step_count=2000)
    closed_at_nodes = sol.profile(ode.nodes)
    assert np.max(np.abs(ode.psi - closed_at_nodes)) <= 1e-6
    expect = 2.0 * (1.0 - 1.0 / ode.nodes)
    assert np.max(np.abs(ode.psi - expect)) <= 1e-6


def test_ode_matches_closed_hyperbolic():
    c = Constellation.self_model(ModelSpace.hyperbolic(2))
    sol = solve_dirichlet_closed(c, 2.0, 1.0, 3.0)
    ode = solve_dirichlet_ode(c, 2.0, 1.0, 3.0, step_count=2000)
    assert np.max(np.abs(ode.psi - sol.profile(ode.nodes))) <= 1e-6


def test_ode_handles_blowup_weights_via_renormalization():
    # strongly negative balance: weight grows like e^{2r}; profile still fine
    c = Constellation.from_functions(2, 2, "exp(r)", h="2", lam="2",
                                     tangency=Tangency.UPPER)
    sol = solve_dirichlet_closed(c, 3.0, 1.0, 4.0)
    ode = solve_dirichlet_ode(c, 3.0, 1.0, 4.0, step_count=4000)
    assert np.max(np.abs(ode.psi - sol.profile(ode.nodes))) <= 1e-6


def test_monotone_profile_and_derivative_nonnegative():
    c = Constellation.from_functions(3, 3, "sinh(r)", h="1/(1+r^2)")
    sol = solve_dirichlet_closed(c, 2.5, 0.5, 5.0)
    rs = np.linspace(0.5, 5.0, 64)
    assert np.all(np.asarray(sol.derivative(rs)) >= 0)
    assert np.all(np.diff(sol.profile(rs)) >= 0)


def test_drifted_capacity_newtonian():
    cap = drifted_capacity(euclid_self(3), 2.0, 1.0, 2.0)
    assert cap == pytest.approx(8 * math.pi, rel=1e-9)


def test_drifted_capacity_large_R():
    cap = drifted_capacity(euclid_self(3), 2.0, 1.0, 1e4)
    assert cap == pytest.approx(4 * math.pi / (1 - 1e-4), rel=1e-9)


def test_drifted_capacity_agrees_with_exact_p2():
    for m, w in [(3, "r"), (2, "r"), (3, "sinh(r)")]:
        c = Constellation.self_model(ModelSpace(m, w))
        cap = drifted_capacity(c, 2.0, 1.0, 2.5)
        exact = exact_annulus_p_capacity(c.model, 1.0, 2.5, 2.0)
        assert cap == pytest.approx(exact, rel=1e-8)


def test_capacity_upper_bound_collapses_to_exact_for_self_constellation():
    """With the natural boundary flux the (p-1)-power chain reproduces the
    exact annulus p-capacity for every p, not only p = 2."""
    for m, p in [(3, 2.0), (3, 3.0), (2, 2.5), (4, 4.0)]:
        c = euclid_self(m)
        flux = float(sphere_volume(c.model, 1.0))
        bound = capacity_upper_bound(c, p, 1.0, 2.0, boundary_flux=flux)
        exact = exact_annulus_p_capacity(c.model, 1.0, 2.0, p)
        assert bound == pytest.approx(exact, rel=1e-8)


def test_capacity_upper_bound_decreases_to_zero_under_divergent_tail():
    # weight ~ 1/r: divergent normalizer, bound = flux / log(R) -> 0
    c = euclid_self(2)
    bounds = [capacity_upper_bound(c, 2.0, 1.0, R) for R in (10.0, 100.0, 1000.0)]
    assert all(b > n for b, n in zip(bounds, bounds[1:]))
    for bound, R in zip(bounds, (10.0, 100.0, 1000.0)):
        assert bound == pytest.approx(1.0 / math.log(R), rel=1e-9)


def test_capacity_upper_bound_p2_reduction():
    c = euclid_self(3)
    flux = 4 * math.pi
    bound = capacity_upper_bound(c, 2.0, 1.0, 2.0, boundary_flux=flux)
    cap = drifted_capacity(c, 2.0, 1.0, 2.0)
    assert bound == pytest.approx(flux * cap / (4 * math.pi), rel=1e-12)
    assert bound == pytest.approx(8 * math.pi, rel=1e-9)


def test_capacity_upper_bound_rejects_nonpositive_flux():
    with pytest.raises(ValueError):
        capacity_upper_bound(euclid_self(3), 2.0, 1.0, 2.0, boundary_flux=0.0)


def test_flux_form_equals_formula_form():
    c = Constellation.from_functions(3, 3, "sinh(r)", h="1/(1+r)")
    sol = solve_dirichlet_closed(c, 2.5, 1.0, 4.0)
    flux_form = float(sphere_volume(c.model, 1.0)) * sol.derivative(1.0)
    formula = drifted_capacity(c, 2.5, 1.0, 4.0)
    assert flux_form == pytest.approx(formula, rel=1e-10)


def test_operator_residual_closed_solution_small():
    c = euclid_self(3)
    sol = solve_dirichlet_closed(c, 2.0, 1.0, 2.0)
    assert operator_residual(c, 2.0, 1.0, 2.0, sol) <= 1e-6


def test_operator_residual_negative_control():
    c = euclid_self(3)
    sol = solve_dirichlet_closed(c, 2.0, 1.0, 2.0)

    def perturbed(r):
        return sol.profile(r) + 0.01 * np.sin(3.0 * np.asarray(r))

    assert operator_residual(c, 2.0, 1.0, 2.0, perturbed) > 1e-3


def test_profile_concavity_under_nonnegative_balance():
    """With balance >= 0 the profile satisfies psi'' - psi' w'/w <= 0."""
    c = Constellation.from_functions(4, 3, "sinh(r)", g="0.9", h="1/(1+r)")
    sol = solve_dirichlet_closed(c, 2.5, 1.0, 4.0)
    h = 1e-4
    rs = np.linspace(1.0 + 3 * h, 4.0 - 3 * h, 101)
    pts = rs[:, None] + h * np.array([-1.0, 0.0, 1.0])[None, :]
    vals = np.asarray(sol.profile(np.sort(pts.ravel()))).reshape(pts.shape)
    d1 = (vals[:, 2] - vals[:, 0]) / (2 * h)
    d2 = (vals[:, 2] - 2 * vals[:, 1] + vals[:, 0]) / (h * h)
    jw = np.cosh(rs) / np.sinh(rs)
    assert np.all(d2 - d1 * jw <= 1e-8)


def test_drifted_capacity_monotone_in_R_with_correct_limit():
    # divergent weight (plane): capacity decreases without a positive floor
    plane = euclid_self(2)
    caps = [drifted_capacity(plane, 2.0, 1.0, R) for R in (10.0, 100.0, 1000.0)]
    assert caps[0] > caps[1] > caps[2]
    assert caps[2] < 0.5 * caps[0]
    # convergent weight (hyperbolic): capacity stabilizes at a positive limit
    hyp = Constellation.self_model(ModelSpace.hyperbolic(3))
    caps = [drifted_capacity(hyp, 2.0, 1.0, R) for R in (5.0, 20.0, 80.0)]
    assert caps[0] > caps[1] > caps[2] > 0
    assert caps[2] >= 0.95 * caps[1]


def test_boundary_values_always_exact():
    c = Constellation.from_functions(2, 2, "sinh(r)", h="coth(r)", lam="coth(r)",
                                     tangency=Tangency.UPPER)
    sol = solve_dirichlet_closed(c, 4.0, 0.5, 6.0)
    assert sol.profile(0.5) == 0.0
    assert sol.profile(6.0) == 1.0
