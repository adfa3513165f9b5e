"""Implicit acoustic substep: star states, banded characteristic solves
against a dense oracle, invariants, forcing, subcharacteristic guard."""

import numpy as np
import pytest

from lpdg import (
    ConservedState,
    FarField,
    GasModel,
    LagrangeState,
    PERIODIC,
    SolutionField,
    SubcharacteristicError,
    gauss_lobatto,
    riemann_star,
    select_a,
    solve_acoustic_step,
    to_lagrange,
)
from lpdg.acoustic import ghost_lagrange

from _oracles import dense_acoustic

MODEL = GasModel(kappa=0.05625, gamma=1.6)


def random_field(rng, p, n, boundary="periodic", h=None):
    rho = 1.0 + rng.uniform(0.2, 1.2, (n, p + 1))
    mom = rho * rng.uniform(-0.8, 0.8, (n, p + 1))
    if boundary == "periodic":
        bc = PERIODIC
    else:
        bc = FarField(
            left=ConservedState(float(rho[0, 0]), float(mom[0, 0])),
            right=ConservedState(float(rho[-1, -1]), float(mom[-1, -1])),
        )
    return SolutionField(rho=rho, mom=mom, h=h or 1.0 / n, x_left=0.0, boundary=bc)


def test_star_state_rankine_hugoniot_residuals():
    # both jump conditions across each of the two acoustic waves, en masse
    rng = np.random.default_rng(31)
    worst = 0.0
    for trial in range(10):
        a = float(rng.uniform(0.5, 20.0))
        m = 1000
        left = LagrangeState(
            tau=rng.uniform(0.1, 4.0, m),
            vel=rng.uniform(-3.0, 3.0, m),
            pi=rng.uniform(0.01, 5.0, m),
        )
        right = LagrangeState(
            tau=rng.uniform(0.1, 4.0, m),
            vel=rng.uniform(-3.0, 3.0, m),
            pi=rng.uniform(0.01, 5.0, m),
        )
        star = riemann_star(left, right, a)
        r1 = a * (star.tau_l_star - left.tau) - (star.u_star - left.vel)
        r2 = (star.pi_star - left.pi) + a * (star.u_star - left.vel)
        r3 = a * (star.tau_r_star - right.tau) + (star.u_star - right.vel)
        r4 = (star.pi_star - right.pi) - a * (star.u_star - right.vel)
        scale = (
            1.0
            + np.abs(left.pi)
            + np.abs(right.pi)
            + a * (np.abs(left.vel) + np.abs(right.vel))
        )
        for r in (r1, r2, r3, r4):
            worst = max(worst, float(np.max(np.abs(r) / scale)))
    assert worst <= 1e-13


def test_star_state_consistency_and_validation():
    w = LagrangeState(tau=0.8, vel=0.3, pi=1.7)
    star = riemann_star(w, w, 2.5)
    assert star.u_star == pytest.approx(0.3, abs=1e-16)
    assert star.pi_star == pytest.approx(1.7, abs=1e-16)
    assert star.tau_l_star == pytest.approx(0.8, abs=1e-16)
    assert star.tau_r_star == pytest.approx(0.8, abs=1e-16)
    with pytest.raises(ValueError):
        riemann_star(w, w, 0.0)
    with pytest.raises(ValueError):
        riemann_star(LagrangeState(-1.0, 0.0, 1.0), w, 1.0)


def test_single_element_periodic_solve_by_hand():
    # p = 1, one periodic element: both characteristic systems collapse to the
    # same 2x2 matrix [[1 + c/2, -c/2], [-c/2, 1 + c/2]] with c = 2 a dt tau / h.
    basis = gauss_lobatto(1)
    rho = np.array([[1.25, 1.25]])
    vel = np.array([[0.4, -0.1]])
    field = SolutionField(rho=rho, mom=rho * vel, h=0.5, x_left=0.0,
                          boundary=PERIODIC)
    a = select_a(MODEL, field, 1.05)
    dt = 0.01
    ac = solve_acoustic_step(MODEL, basis, field, a, dt)

    tau = 1.0 / 1.25
    pi = MODEL.pressure(tau)
    c = 2.0 * a * (dt / 0.5) * tau
    mat = np.array([[1.0 + 0.5 * c, -0.5 * c], [-0.5 * c, 1.0 + 0.5 * c]])
    wp = np.linalg.solve(mat, pi + a * vel[0])
    wm = np.linalg.solve(mat, pi - a * vel[0])
    assert np.allclose(ac.w_plus[0], wp, rtol=1e-13, atol=1e-15)
    assert np.allclose(ac.w_minus[0], wm, rtol=1e-13, atol=1e-15)
    assert np.allclose(ac.vel[0], (wp - wm) / (2 * a), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("boundary", ["periodic", "farfield"])
def test_matches_dense_oracle(p, boundary):
    rng = np.random.default_rng(40 + p)
    for n in (1, 2, 3, 5, 8):
        basis = gauss_lobatto(p)
        field = random_field(rng, p, n, boundary)
        a = select_a(MODEL, field, 2.0)
        dt = 0.05 * field.h / a
        ac = solve_acoustic_step(MODEL, basis, field, a, dt)
        tau1, u1, pi1, us, ps = dense_acoustic(MODEL, basis, field, a, dt)
        scale = max(1.0, float(np.max(np.abs(pi1))), a * float(np.max(np.abs(u1))))
        assert np.max(np.abs(ac.tau - tau1)) <= 1e-12 * scale
        assert np.max(np.abs(ac.vel - u1)) <= 1e-12 * scale
        assert np.max(np.abs(ac.pi - pi1)) <= 1e-12 * scale
        assert np.max(np.abs(ac.star_u - us)) <= 1e-12 * scale
        assert np.max(np.abs(ac.star_pi - ps)) <= 1e-12 * scale


def test_matches_dense_oracle_on_discontinuous_data():
    basis = gauss_lobatto(1)
    n, h = 8, 0.125
    x_mid = np.arange(n) * h - 0.5 + 0.5 * h
    rho = np.where((x_mid < 0)[:, None], 1.0, 2.0) * np.ones((n, 2))
    mom = np.where((x_mid < 0)[:, None], 1.0, 0.5) * np.ones((n, 2))
    bc = FarField(left=ConservedState(1.0, 1.0), right=ConservedState(2.0, 0.5))
    field = SolutionField(rho=rho, mom=mom, h=h, x_left=-0.5, boundary=bc)
    a = select_a(MODEL, field, 1.5)
    dt = 0.1 * h / a
    ac = solve_acoustic_step(MODEL, basis, field, a, dt)
    tau1, u1, pi1, us, ps = dense_acoustic(MODEL, basis, field, a, dt)
    assert np.max(np.abs(ac.tau - tau1)) <= 1e-12
    assert np.max(np.abs(ac.vel - u1)) <= 1e-12
    assert np.max(np.abs(ac.pi - pi1)) <= 1e-12
    assert np.max(np.abs(ac.star_u - us)) <= 1e-12
    assert np.max(np.abs(ac.star_pi - ps)) <= 1e-12


def test_volume_factor_consistency():
    # tau' = l_factor * tau^n; the stored weak form of l_factor agrees with the
    # strong divergence form obtained through summation by parts
    rng = np.random.default_rng(44)
    for p, boundary in ((1, "periodic"), (2, "farfield"), (3, "periodic")):
        basis = gauss_lobatto(p)
        field = random_field(rng, p, 6, boundary)
        a = select_a(MODEL, field, 1.5)
        dt = 0.05 * field.h / a
        ac = solve_acoustic_step(MODEL, basis, field, a, dt)
        tau_n = 1.0 / field.rho
        lam = dt / field.h
        assert np.max(np.abs(ac.tau - ac.l_factor * tau_n)) <= 1e-13 * np.max(ac.tau)

        lam_k = 2.0 * lam / basis.weights
        lb = 1.0 + 2.0 * lam * (ac.vel @ basis.diff.T)
        lb[:, -1] += lam_k[-1] * (ac.star_u[1:] - ac.vel[:, -1])
        lb[:, 0] -= lam_k[0] * (ac.star_u[:-1] - ac.vel[:, 0])
        assert np.max(np.abs(ac.l_factor - lb)) <= 1e-12


def test_interface_stars_match_trace_riemann_solution():
    # the returned stars coincide with the star state of the solved traces
    rng = np.random.default_rng(45)
    for boundary in ("periodic", "farfield"):
        p, n = 2, 7
        basis = gauss_lobatto(p)
        field = random_field(rng, p, n, boundary)
        a = select_a(MODEL, field, 1.5)
        dt = 0.05 * field.h / a
        ac = solve_acoustic_step(MODEL, basis, field, a, dt)

        gl, gr = ghost_lagrange(MODEL, field.boundary)
        lt_vel = np.empty(n + 1)
        lt_pi = np.empty(n + 1)
        rt_vel = np.empty(n + 1)
        rt_pi = np.empty(n + 1)
        lt_vel[1:] = ac.vel[:, -1]
        lt_pi[1:] = ac.pi[:, -1]
        rt_vel[:-1] = ac.vel[:, 0]
        rt_pi[:-1] = ac.pi[:, 0]
        if boundary == "periodic":
            lt_vel[0] = ac.vel[-1, -1]
            lt_pi[0] = ac.pi[-1, -1]
            rt_vel[-1] = ac.vel[0, 0]
            rt_pi[-1] = ac.pi[0, 0]
        else:
            lt_vel[0], lt_pi[0] = gl.vel, gl.pi
            rt_vel[-1], rt_pi[-1] = gr.vel, gr.pi
        left = LagrangeState(tau=np.ones(n + 1), vel=lt_vel, pi=lt_pi)
        right = LagrangeState(tau=np.ones(n + 1), vel=rt_vel, pi=rt_pi)
        star = riemann_star(left, right, a)
        scale = max(1.0, float(np.max(np.abs(ac.pi))))
        assert np.max(np.abs(ac.star_u - star.u_star)) <= 1e-10 * scale
        assert np.max(np.abs(ac.star_pi - star.pi_star)) <= 1e-10 * scale


def test_stationary_invariant_is_copied_verbatim():
    rng = np.random.default_rng(46)
    field = random_field(rng, 3, 5)
    a = select_a(MODEL, field, 1.1)
    ac = solve_acoustic_step(MODEL, gauss_lobatto(3), field, a, 0.002)
    w_n = to_lagrange(MODEL, ConservedState(field.rho, field.mom))
    assert np.array_equal(ac.j_inv, w_n.pi + a * a * w_n.tau)


def test_balanced_forcing_is_a_discrete_steady_state():
    # continuous density, constant velocity, forcing equal to the discrete
    # pressure gradient: the forced solve must return the state unchanged
    for p in (1, 2, 3):
        basis = gauss_lobatto(p)
        n, h = 12, 1.0 / 12
        x = (h * np.arange(n)[:, None]) + 0.5 * h * (basis.nodes[None, :] + 1.0)
        rho = 1.0 + 0.3 * np.sin(2 * np.pi * x)
        u0 = 0.4
        field = SolutionField(rho=rho, mom=rho * u0, h=h, x_left=0.0,
                              boundary=PERIODIC)
        w_n = to_lagrange(MODEL, ConservedState(field.rho, field.mom))
        forcing = (2.0 / h) * (w_n.pi @ basis.diff.T)
        a = select_a(MODEL, field, 1.1)
        dt = 0.3 * h / a
        ac = solve_acoustic_step(MODEL, basis, field, a, dt,
                                 momentum_source=forcing)
        scale = max(1.0, float(np.max(np.abs(w_n.pi))))
        assert np.max(np.abs(ac.tau - w_n.tau)) <= 1e-12 * scale
        assert np.max(np.abs(ac.vel - u0)) <= 1e-12 * scale
        assert np.max(np.abs(ac.pi - w_n.pi)) <= 1e-12 * scale


def test_forcing_equals_homogeneous_solve_of_shifted_data():
    # a forced solve is the homogeneous solve started from the velocity
    # advanced by dt tau s, with identical pressure and specific volume
    rng = np.random.default_rng(47)
    basis = gauss_lobatto(2)
    field = random_field(rng, 2, 6)
    s = rng.standard_normal((6, 3))
    a = select_a(MODEL, field, 1.2)
    dt = 0.001
    tau_n = 1.0 / field.rho
    shifted = field.with_dofs(field.rho,
                              field.rho * (field.mom / field.rho + dt * tau_n * s))
    forced = solve_acoustic_step(MODEL, basis, field, a, dt, momentum_source=s)
    plain = solve_acoustic_step(MODEL, basis, shifted, a, dt)
    assert np.max(np.abs(forced.tau - plain.tau)) <= 1e-12
    assert np.max(np.abs(forced.vel - plain.vel)) <= 1e-12
    assert np.max(np.abs(forced.pi - plain.pi)) <= 1e-12


def test_subcharacteristic_guard_raises():
    # colliding streams compress tau below its time-n floor; a wave speed at
    # the bare time-n bound must be rejected with the required value attached
    basis = gauss_lobatto(1)
    n, h = 10, 0.1
    x_mid = np.arange(n) * h - 0.5 + 0.5 * h
    rho = np.ones((n, 2))
    mom = np.where((x_mid < 0)[:, None], 1.0, -1.0) * np.ones((n, 2))
    bc = FarField(left=ConservedState(1.0, 1.0), right=ConservedState(1.0, -1.0))
    field = SolutionField(rho=rho, mom=mom, h=h, x_left=-0.5, boundary=bc)
    model = GasModel(kappa=1.0, gamma=1.4)
    a = select_a(model, field, 1.0)
    with pytest.raises(SubcharacteristicError) as err:
        solve_acoustic_step(model, basis, field, a, 0.3 * h / a)
    assert err.value.required > err.value.used


def test_select_a_hand_value_and_ghosts():
    model = GasModel(kappa=1.0, gamma=3.0)
    field = SolutionField(rho=np.full((2, 2), 2.0), mom=np.zeros((2, 2)),
                          h=0.5, x_left=0.0, boundary=PERIODIC)
    # -p'(tau) = 3 tau^-4 = 48 at tau = 1/2
    assert select_a(model, field, 1.0) == pytest.approx(np.sqrt(48.0), rel=1e-14)
    assert select_a(model, field, 1.05) == pytest.approx(1.05 * np.sqrt(48.0), rel=1e-14)

    dense = FarField(left=ConservedState(4.0, 0.0), right=ConservedState(2.0, 0.0))
    field2 = SolutionField(rho=np.full((2, 2), 2.0), mom=np.zeros((2, 2)),
                           h=0.5, x_left=0.0, boundary=dense)
    # the left ghost at rho = 4 dominates: -p'(1/4) = 3 * 4^4
    assert select_a(model, field2, 1.0) == pytest.approx(np.sqrt(768.0), rel=1e-14)
    with pytest.raises(ValueError):
        select_a(model, field, 0.9)


def test_ghost_lagrange_states():
    assert ghost_lagrange(MODEL, PERIODIC) == (None, None)
    bc = FarField(left=ConservedState(2.0, 1.0), right=ConservedState(0.5, -0.25))
    gl, gr = ghost_lagrange(MODEL, bc)
    assert gl.tau == pytest.approx(0.5, rel=1e-15)
    assert gl.vel == pytest.approx(0.5, rel=1e-15)
    assert gl.pi == pytest.approx(MODEL.pressure(0.5), rel=1e-15)
    assert gr.tau == pytest.approx(2.0, rel=1e-15)
    assert gr.vel == pytest.approx(-0.5, rel=1e-15)


def test_argument_validation():
    basis = gauss_lobatto(1)
    rng = np.random.default_rng(48)
    field = random_field(rng, 1, 3)
    with pytest.raises(ValueError):
        solve_acoustic_step(MODEL, basis, field, -1.0, 0.01)
    with pytest.raises(ValueError):
        solve_acoustic_step(MODEL, basis, field, 1.0, 0.0)
    with pytest.raises(ValueError):
        solve_acoustic_step(MODEL, gauss_lobatto(2), field, 1.0, 0.01)
