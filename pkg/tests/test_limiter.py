"""Mean-preserving nodal limiters, checked against brute-force grid scans."""

import numpy as np
import pytest

from lpdg import (
    ConservedState,
    FarField,
    GasModel,
    LimiterConfig,
    LimiterError,
    PERIODIC,
    SolutionField,
    density_bounds,
    density_limit,
    entropy_bounds,
    entropy_limit,
    gauss_lobatto,
    positivity_limit,
)

from _oracles import scan_theta_density, scan_theta_energy, scan_theta_envelope

MODEL = GasModel(kappa=1.0, gamma=1.4)


def test_positivity_hand_case():
    basis = gauss_lobatto(1)
    rho = np.array([[-0.2, 1.0]])
    mom = np.array([[0.1, 0.3]])
    eps = 1e-12
    new_rho, new_mom, theta = positivity_limit(basis, rho, mom, eps)
    expected = ((0.4 - eps) / 0.6) * (1.0 - 1e-15)
    assert theta[0] == pytest.approx(expected, rel=1e-14)
    assert new_rho.min() >= eps
    # both components blend with the same factor about their own means
    assert new_mom[0, 0] == pytest.approx(0.2 + theta[0] * (0.1 - 0.2), rel=1e-14)


def test_positivity_matches_grid_scan():
    rng = np.random.default_rng(60)
    basis = gauss_lobatto(3)
    half_w = 0.5 * basis.weights
    eps = 1e-8
    for _ in range(40):
        rho = rng.uniform(-0.5, 2.0, (1, 4))
        if rho[0] @ half_w <= eps:
            continue
        mom = rng.uniform(-1.0, 1.0, (1, 4))
        new_rho, _, theta = positivity_limit(basis, rho, mom, eps)
        ref = scan_theta_density(half_w, rho[0], eps)
        assert theta[0] == pytest.approx(ref, abs=2e-6)
        assert new_rho.min() >= eps * (1.0 - 1e-12)


def test_positivity_passthrough_and_mean_preservation():
    rng = np.random.default_rng(61)
    basis = gauss_lobatto(2)
    half_w = 0.5 * basis.weights
    rho = rng.uniform(0.5, 2.0, (6, 3))
    mom = rng.uniform(-1.0, 1.0, (6, 3))
    out_rho, out_mom, theta = positivity_limit(basis, rho, mom)
    assert out_rho is rho and out_mom is mom
    assert np.all(theta == 1.0)

    rho[2, 1] = -0.3
    rho[4, 0] = -0.1
    new_rho, new_mom, theta = positivity_limit(basis, rho, mom)
    assert np.all((theta[[2, 4]] > 0) & (theta[[2, 4]] < 1))
    assert np.all(theta[[0, 1, 3, 5]] == 1.0)
    # untouched elements are copied verbatim, means never move
    assert np.array_equal(new_rho[0], rho[0])
    assert np.max(np.abs(new_rho @ half_w - rho @ half_w)) <= 1e-14 * np.max(np.abs(rho @ half_w))
    assert np.max(np.abs(new_mom @ half_w - mom @ half_w)) <= 1e-14


def test_positivity_idempotent():
    basis = gauss_lobatto(2)
    rho = np.array([[-0.2, 1.2, 0.8], [0.5, 0.6, 0.7]])
    mom = np.zeros((2, 3))
    r1, m1, _ = positivity_limit(basis, rho, mom)
    r2, m2, theta = positivity_limit(basis, r1, m1)
    assert r2 is r1 and m2 is m1
    assert np.all(theta == 1.0)


def test_positivity_rejects_inadmissible_mean():
    basis = gauss_lobatto(1)
    rho = np.array([[1.0, -1.0]])
    with pytest.raises(LimiterError):
        positivity_limit(basis, rho, np.zeros((1, 2)))


def test_positivity_old_mean_reference():
    basis = gauss_lobatto(1)
    rho = np.array([[-0.2, 1.0]])
    mom = np.zeros((1, 2))
    eps = 1e-12
    old = np.array([0.3])
    _, _, theta = positivity_limit(basis, rho, mom, eps, mean_level="old",
                                   mean_rho_old=old)
    expected = ((0.3 - eps) / 0.6) * (1.0 - 1e-15)
    assert theta[0] == pytest.approx(expected, rel=1e-14)
    with pytest.raises(ValueError):
        positivity_limit(basis, rho, mom, eps, mean_level="old")


def test_density_bounds_stencils():
    rho = np.array([[1.0, 2.0], [3.0, 4.0], [0.5, 6.0]])
    mom = np.zeros((3, 2))
    field = SolutionField(rho=rho, mom=mom, h=0.5, x_left=0.0, boundary=PERIODIC)
    lower, upper = density_bounds(field)
    assert np.array_equal(lower, [0.5, 0.5, 0.5])
    assert np.array_equal(upper, [6.0, 6.0, 6.0])

    bc = FarField(left=ConservedState(10.0, 0.0), right=ConservedState(0.1, 0.0))
    field = SolutionField(rho=rho, mom=mom, h=0.5, x_left=0.0, boundary=bc)
    lower, upper = density_bounds(field)
    assert np.array_equal(lower, [1.0, 0.5, 0.1])
    assert np.array_equal(upper, [10.0, 6.0, 6.0])


def test_density_limit_matches_grid_scan():
    rng = np.random.default_rng(62)
    basis = gauss_lobatto(2)
    half_w = 0.5 * basis.weights
    for _ in range(40):
        rho = rng.uniform(0.2, 3.0, (1, 3))
        mom = rng.uniform(-1.0, 1.0, (1, 3))
        mean = float(rho[0] @ half_w)
        lower = np.array([mean * rng.uniform(0.3, 0.9)])
        upper = np.array([mean * rng.uniform(1.1, 1.8)])
        new_rho, _, theta = density_limit(basis, rho, mom, lower, upper)
        ref = scan_theta_envelope(half_w, rho[0], lower[0], upper[0])
        assert theta[0] == pytest.approx(ref, abs=2e-6)
        atol = 1e-12 * max(1.0, upper[0])
        assert new_rho.min() >= lower[0] - atol
        assert new_rho.max() <= upper[0] + atol


def test_density_limit_passthrough_means_and_flatten():
    basis = gauss_lobatto(1)
    rho = np.array([[1.0, 2.0], [3.0, 3.0]])
    mom = np.array([[0.5, -0.5], [1.0, 2.0]])
    half_w = 0.5 * basis.weights

    out = density_limit(basis, rho, mom, np.array([1.0, 2.9]), np.array([2.0, 3.1]))
    assert out[0] is rho and out[1] is mom

    # infeasible mean (mean 3.0 above upper 2.0) flattens to the mean
    new_rho, new_mom, theta = density_limit(
        basis, rho, mom, np.array([0.5, 0.5]), np.array([3.0, 2.0])
    )
    assert theta[1] == 0.0
    assert np.array_equal(new_rho[1], [3.0, 3.0])
    assert np.array_equal(new_mom[1], [1.5, 1.5])
    assert np.max(np.abs(new_rho @ half_w - rho @ half_w)) <= 1e-14 * 3.0
    assert np.max(np.abs(new_mom @ half_w - mom @ half_w)) <= 1e-14 * 2.0


def test_entropy_bounds_stencils():
    rho = np.array([[1.0, 1.0], [2.0, 2.0], [1.5, 1.5]])
    mom = np.zeros((3, 2))
    e = MODEL.total_energy(np.array([1.0, 2.0, 1.5]), np.zeros(3))
    field = SolutionField(rho=rho, mom=mom, h=0.5, x_left=0.0, boundary=PERIODIC)
    bounds = entropy_bounds(MODEL, field)
    assert bounds == pytest.approx([e[1], e[1], e[1]], rel=1e-15)

    bc = FarField(left=ConservedState(3.0, 0.0), right=ConservedState(0.5, 0.0))
    field = SolutionField(rho=rho, mom=mom, h=0.5, x_left=0.0, boundary=bc)
    bounds = entropy_bounds(MODEL, field)
    e_gl = float(MODEL.total_energy(3.0, 0.0))
    assert bounds == pytest.approx([max(e_gl, e[1]), e[1], e[1]], rel=1e-15)


def test_entropy_limit_matches_grid_scan():
    rng = np.random.default_rng(63)
    basis = gauss_lobatto(2)
    half_w = 0.5 * basis.weights
    for _ in range(40):
        rho = rng.uniform(0.3, 2.0, (1, 3))
        mom = rng.uniform(-1.5, 1.5, (1, 3))
        mean_e = float(MODEL.total_energy(rho[0] @ half_w, mom[0] @ half_w))
        node_e = float(np.max(MODEL.total_energy(rho[0], mom[0])))
        if node_e <= mean_e * 1.01:
            continue
        ceiling = np.array([mean_e + 0.5 * (node_e - mean_e)])
        new_rho, new_mom, theta = entropy_limit(MODEL, basis, rho, mom, ceiling)
        ref = scan_theta_energy(MODEL, half_w, rho[0], mom[0], ceiling[0])
        assert theta[0] == pytest.approx(ref, abs=2e-6)
        blended = MODEL.total_energy(new_rho, new_mom)
        assert np.max(blended) <= ceiling[0] + 1e-9 * max(1.0, ceiling[0])


def test_entropy_limit_passthrough_flatten_and_validation():
    basis = gauss_lobatto(1)
    rho = np.array([[1.0, 1.0]])
    mom = np.array([[0.1, -0.1]])
    loose = np.array([100.0])
    out = entropy_limit(MODEL, basis, rho, mom, loose)
    assert out[0] is rho and out[1] is mom

    # ceiling below the mean energy: no blend can enforce it; flatten
    tight = np.array([0.5 * float(MODEL.total_energy(1.0, 0.0))])
    new_rho, new_mom, theta = entropy_limit(MODEL, basis, rho, mom, tight)
    assert theta[0] == 0.0
    assert np.array_equal(new_rho[0], [1.0, 1.0])
    assert np.array_equal(new_mom[0], [0.0, 0.0])

    with pytest.raises(ValueError):
        entropy_limit(MODEL, basis, rho, mom, np.zeros(3))


def test_entropy_limit_idempotent_and_mean_preserving():
    rng = np.random.default_rng(64)
    basis = gauss_lobatto(3)
    half_w = 0.5 * basis.weights
    rho = rng.uniform(0.3, 2.0, (8, 4))
    mom = rng.uniform(-1.5, 1.5, (8, 4))
    # place each ceiling strictly between the (feasible) energy of the mean
    # state and the largest nodal energy so a genuine partial blend occurs
    e_of_mean = MODEL.total_energy(rho @ half_w, mom @ half_w)
    node_max = MODEL.total_energy(rho, mom).max(axis=1)
    bounds = e_of_mean + 0.6 * (node_max - e_of_mean)
    r1, m1, theta = entropy_limit(MODEL, basis, rho, mom, bounds)
    assert np.any(theta < 1.0)
    assert np.max(np.abs(r1 @ half_w - rho @ half_w)) <= 1e-14 * np.max(rho @ half_w)
    assert np.max(np.abs(m1 @ half_w - mom @ half_w)) <= 1e-14 * max(1.0, np.max(np.abs(mom @ half_w)))
    r2, m2, theta2 = entropy_limit(MODEL, basis, r1, m1, bounds)
    assert r2 is r1 and m2 is m1
    assert np.all(theta2 == 1.0)


def test_limiter_config_validation():
    cfg = LimiterConfig()
    assert cfg.eps_pos == 1e-12 and cfg.entropy_enabled and not cfg.density_enabled
    with pytest.raises(ValueError):
        LimiterConfig(eps_pos=0.0)
    with pytest.raises(ValueError):
        LimiterConfig(eps_pos=1e-5)
    with pytest.raises(ValueError):
        LimiterConfig(root_tol=0.0)
    with pytest.raises(ValueError):
        LimiterConfig(mean_level="stale")
