import math

import numpy as np
import pytest
from scipy.integrate import quad

from cvteleport.exceptions import ContractViolation, InvariantViolation
from cvteleport.noise import commutator_matrix
from cvteleport.protocol import (GainSchedule, ProtocolConfig, averaged_generator,
                                 averaging_identity, build_G, build_G0, canonical_gains,
                                 displacement_trajectory, first_order_product, propagate_stepwise,
                                 run_protocol)

J4 = np.kron(np.eye(2), [[0.0, 1.0], [-1.0, 0.0]])


def small_config(**kw):
    base = dict(kappa=0.8, g=1.1, Z=1.4, omega1=1.0, omega2=2.3, total_time=0.3, steps=800)
    base.update(kw)
    return ProtocolConfig(**base)


def test_config_validation():
    with pytest.raises(ContractViolation):
        small_config(Z=0.0)
    with pytest.raises(ContractViolation):
        small_config(steps=0)
    with pytest.raises(InvariantViolation):
        small_config(omega2=1.0)
    with pytest.raises(InvariantViolation):
        small_config(total_time=10.0)
    with pytest.raises(ContractViolation):
        small_config(window=0.15 + 1e-5)
    with pytest.raises(InvariantViolation):
        ProtocolConfig.from_omega_dt(5000.0)
    with pytest.raises(ContractViolation):
        small_config(mode="other")


def test_from_omega_dt_respects_phase_cap():
    cfg = ProtocolConfig.from_omega_dt(300.0)
    assert cfg.omega_max * cfg.tau <= 1e-3 * (1 + 1e-12)
    assert cfg.steps == 600_000
    assert cfg.epsilon == pytest.approx(1 / 300)


def test_teleport_mode_allows_equal_frequencies():
    cfg = ProtocolConfig.from_omega_dt(100.0, omega2_ratio=1.0, mode="teleport")
    assert cfg.epsilon == pytest.approx(0.01)


def test_gain_schedule_vectorised():
    gs = GainSchedule((1.0, 2.0, 3.0, 4.0), (1.0, 1.0, 2.0, 2.0))
    t = np.linspace(0, 1, 7)
    out = gs(t)
    assert out.shape == (7, 4)
    assert np.allclose(out[:, 0], np.sin(t))
    assert np.allclose(out[:, 3], 4 * np.cos(2 * t))
    with pytest.raises(ContractViolation):
        GainSchedule((1.0, 2.0))


def test_generator_matches_closed_form():
    cfg = small_config()
    gains = canonical_gains(cfg)
    ga, gb = -cfg.g / cfg.Z, -cfg.g * cfg.Z
    t = 0.37
    s1, c1, s2, c2 = (np.sin(cfg.omega1 * t), np.cos(cfg.omega1 * t),
                      np.sin(cfg.omega2 * t), np.cos(cfg.omega2 * t))
    f = np.array([ga * s2, gb * c2, gb * s1, ga * c1])
    v = np.array([-s1, c1, -s2, c2])
    G = build_G(t, cfg, gains)
    assert np.allclose(G, cfg.kappa / cfg.total_time * np.outer(f, v))
    # representative entries written out
    k = cfg.kappa / cfg.total_time
    assert G[0, 2] == pytest.approx(-k * ga * s2 * s2)
    assert G[1, 3] == pytest.approx(k * gb * c2 * c2)
    assert G[2, 0] == pytest.approx(-k * gb * s1 * s1)


def test_stepwise_and_compiled_paths_agree():
    cfg = small_config(steps=300, total_time=0.1)
    gains = canonical_gains(cfg)
    a = propagate_stepwise(cfg, gains)
    b = run_protocol(cfg, gains)
    assert np.allclose(a.S, b.S, atol=1e-12)
    assert np.allclose(a.T_noise, b.T_noise, atol=1e-12)


def test_first_order_product_is_exact_composition():
    cfg = small_config()
    gains = canonical_gains(cfg)
    assert np.allclose(first_order_product(cfg, gains), run_protocol(cfg, gains).S, atol=1e-12)


def test_commutators_preserved():
    cfg = ProtocolConfig.from_omega_dt(200.0, kappa=1.3, g=0.7, Z=1.8)
    res = run_protocol(cfg, canonical_gains(cfg))
    total = res.S @ J4 @ res.S.T + commutator_matrix(res.T_noise)
    assert np.allclose(total, J4, atol=1e-10)


def test_zero_gains_leave_atoms_untouched():
    cfg = small_config()
    res = run_protocol(cfg, GainSchedule.zero())
    assert np.array_equal(res.S, np.eye(4))
    n = res.slices
    assert not np.any(res.T_noise[:, :n])
    # back-action from the kicks: kappa^2 over the whole interaction in each direction pair
    assert np.allclose(res.T_noise @ res.T_noise.T,
                       cfg.kappa**2 / cfg.steps * sum(
                           np.outer(k, k) for k in _kicks(cfg)), atol=1e-12)


def _kicks(cfg):
    for n in range(1, cfg.steps + 1):
        a1, a2 = cfg.omega1 * n * cfg.tau, cfg.omega2 * n * cfg.tau
        yield np.array([np.cos(a1), np.sin(a1), np.cos(a2), np.sin(a2)])


def test_window_restricts_slices():
    cfg = small_config(window=0.15)
    res = run_protocol(cfg, canonical_gains(cfg))
    assert res.slices == 400
    assert res.T_noise.shape == (4, 800)


def test_mean_trajectory_follows_map(rng):
    cfg = small_config()
    gains = canonical_gains(cfg)
    d0 = rng.normal(size=4)
    traj = displacement_trajectory(cfg, gains, d0)
    assert np.allclose(traj[-1], run_protocol(cfg, gains).S @ d0, atol=1e-12)
    with pytest.raises(ContractViolation):
        displacement_trajectory(cfg, gains, d0, np.zeros((3, 4)))


def test_averaged_generator_approaches_target():
    for odt, tol in ((100.0, 0.05), (400.0, 0.0125)):
        cfg = ProtocolConfig.from_omega_dt(odt, Z=1.5)
        G0 = build_G0(cfg)
        Gbar = averaged_generator(cfg, canonical_gains(cfg))
        assert np.max(np.abs(Gbar - G0)) * cfg.total_time <= tol


def test_passive_generator_flips_inverse_z_entries():
    cfg = small_config()
    diff = build_G0(cfg, passive=True) - build_G0(cfg)
    assert np.count_nonzero(diff) == 2
    assert diff[0, 2] == -diff[3, 1]


@pytest.mark.parametrize("pair", [("sin", "sin"), ("sin", "cos"), ("cos", "sin"), ("cos", "cos")])
@pytest.mark.parametrize("omegas", [(1.0, 2.0), (1.7, 1.7), (0.3, 5.1)])
def test_averaging_identity_matches_quadrature(pair, omegas):
    fn = {"sin": math.sin, "cos": math.cos}
    wi, wj = omegas
    t0, dt = 0.8, 23.0
    num = quad(lambda t: fn[pair[0]](wi * t) * fn[pair[1]](wj * t), t0, t0 + dt, limit=500)[0] / dt
    assert averaging_identity(pair, wi, wj, t0, dt) == pytest.approx(num, abs=1e-11)


def test_averaging_identity_rejects_bad_input():
    with pytest.raises(ContractViolation):
        averaging_identity(("tan", "sin"), 1.0, 2.0, 0.0, 1.0)
    with pytest.raises(ContractViolation):
        averaging_identity(("sin", "sin"), 1.0, 2.0, 0.0, 0.0)
