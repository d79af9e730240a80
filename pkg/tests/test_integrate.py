"""Integrator, event detection, noise injection, trajectory export."""

import numpy as np
import pytest

import banglearn as bl
from banglearn.integrate import (
    IntegrationBlowupError,
    NoiseSpec,
    SpikeTimeoutError,
    Trajectory,
    add_gaussian_noise,
    detect_population_spikes,
    detect_spike_time,
    first_maximum_from_series,
    read_trajectory_csv,
    rk4_step,
    simulate,
    write_trajectory_csv,
)

from conftest import harmonic_oscillator


def linear_decay_model():
    return bl.Model(name="decay", dimension=1, params=None, drift=lambda x: -x)


def test_rk4_linear_field_hand_expansion():
    # single RK4 step on dx/dt = -x from 1: 1 - h + h^2/2 - h^3/6 + h^4/24
    out = rk4_step(linear_decay_model(), [1.0], 0.0, 0.1)
    assert out[0] == pytest.approx(0.9048375, abs=1e-12)


def test_rk4_fourth_order_on_duffing():
    m = bl.duffing()
    x0 = np.array([0.5, 0.5])

    def integrate(dt):
        x = x0
        for _ in range(int(round(1.0 / dt))):
            x = rk4_step(m, x, 0.0, dt)
        return x

    ref = integrate(1.0 / 4096)
    err_coarse = np.linalg.norm(integrate(1.0 / 16) - ref)
    err_fine = np.linalg.norm(integrate(1.0 / 32) - ref)
    order = np.log2(err_coarse / err_fine)
    assert 3.7 <= order <= 4.3


def test_rk4_fourth_order_on_lorenz():
    m = bl.lorenz()
    x0 = np.array([1.0, -1.0, 2.0])

    def integrate(dt):
        x = x0
        for _ in range(int(round(1.0 / dt))):
            x = rk4_step(m, x, 0.0, dt)
        return x

    ref = integrate(1.0 / 8192)
    err_coarse = np.linalg.norm(integrate(1.0 / 32) - ref)
    err_fine = np.linalg.norm(integrate(1.0 / 64) - ref)
    assert 3.7 <= np.log2(err_coarse / err_fine) <= 4.3


def test_rk4_preserves_equilibrium():
    m = bl.duffing()
    out = rk4_step(m, [1.0, 0.0], 0.0, 0.01)
    assert np.max(np.abs(out - [1.0, 0.0])) < 1e-14


def test_rk4_blowup_signal():
    grow = bl.Model(name="grow", dimension=1, params=None, drift=lambda x: x**2)
    x = np.array([2.0])
    with pytest.raises(IntegrationBlowupError) as info:
        for _ in range(2000):
            x = rk4_step(grow, x, 0.0, 0.1)
    assert info.value.last_good_state is not None


def test_simulate_uncontrolled_duffing_basins():
    m = bl.duffing()
    traj = simulate(m, [0.1, 0.0], lambda x: 0.0, 200.0, 0.01)
    final = traj.states[-1]
    assert min(np.linalg.norm(final - [1, 0]), np.linalg.norm(final - [-1, 0])) < 0.05
    # the basins interleave as spirals; this start is in the left one
    left = simulate(m, [-1.836, -1.934], lambda x: 0.0, 200.0, 0.01)
    assert np.linalg.norm(left.states[-1] - [-1, 0]) < 0.05


def test_simulate_zero_sigma_is_bitwise_noiseless():
    m = bl.duffing()
    a = simulate(m, [0.3, -0.2], lambda x: 1.0, 2.0, 0.01)
    b = simulate(m, [0.3, -0.2], lambda x: 1.0, 2.0, 0.01, noise=NoiseSpec(0.0, 99))
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.controls, b.controls)


def test_simulate_rejects_nonfinite_control():
    m = bl.duffing()
    with pytest.raises(ValueError):
        simulate(m, [0.0, 0.0], lambda x: float("nan"), 1.0, 0.01)


def test_simulate_records_applied_controls_and_replays(thalamic_model):
    # replaying recorded controls open-loop reproduces the states bitwise
    m = bl.duffing()
    noise = NoiseSpec(0.3, seed=5)
    traj = simulate(m, [0.5, 0.5], lambda x: 4.0 if x[0] < 0.5 else 0.0, 1.0, 0.01,
                    noise=noise)
    x = traj.states[0]
    from banglearn.integrate import _rk4
    for k in range(len(traj.controls)):
        x = _rk4(m, x, traj.controls[k], 0.01)
        assert np.array_equal(x, traj.states[k + 1])


def test_trajectory_partial_final_step():
    m = bl.duffing()
    traj = simulate(m, [0.0, 0.0], lambda x: 0.0, 0.55, 0.1)
    assert traj.times[-1] == pytest.approx(0.55)
    steps = np.diff(traj.times)
    assert np.allclose(steps[:-1], 0.1)
    assert steps[-1] == pytest.approx(0.05)


def test_detect_spike_time_sine():
    m = harmonic_oscillator()
    t = detect_spike_time(m, [0.0, 1.0], 1e-3, timeout=10.0)
    assert t == pytest.approx(np.pi / 2, abs=1e-3)


def test_detect_spike_time_timeout():
    with pytest.raises(SpikeTimeoutError):
        detect_spike_time(linear_decay_model(), [1.0], 0.01, timeout=1.0)


def test_thalamic_spike_times(thalamic_model, thalamic_cycle):
    # from the spike point, the next maximum is one full period away
    t_full = detect_spike_time(thalamic_model, thalamic_cycle.points[0], 0.01, 50.0)
    assert t_full == pytest.approx(8.40, abs=0.02)
    # from mid-cycle, time-to-spike is half a period
    mid = thalamic_cycle.state_at_time(thalamic_cycle.period / 2)
    t_half = detect_spike_time(thalamic_model, mid, 0.01, 50.0)
    assert t_half == pytest.approx(thalamic_cycle.period / 2, abs=0.05)


def test_spike_period_stationarity(thalamic_model, thalamic_cycle):
    from banglearn.integrate import integrate_span
    x = thalamic_cycle.points[0]
    t1 = detect_spike_time(thalamic_model, x, 0.01, 50.0)
    x2 = integrate_span(thalamic_model, x, 0.0, t1, 0.01)
    t2 = detect_spike_time(thalamic_model, x2, 0.01, 50.0)
    assert abs(t2 - t1) < 1e-3 * t1


def test_population_spikes_synchronized(thalamic_cycle):
    m = bl.coupled_thalamic(m=5)
    point = thalamic_cycle.state_at_time(4.0)
    x0 = bl.population_state(np.tile(point, (5, 1)))
    times = detect_population_spikes(m, x0, 0.01, 100.0)
    assert times.max() - times.min() < 0.5


def test_population_spikes_single_oscillator_consistency(thalamic_model, thalamic_cycle):
    x0 = thalamic_cycle.state_at_time(2.0)
    single = detect_spike_time(thalamic_model, x0, 0.01, 100.0)
    m1 = bl.coupled_thalamic(m=1)
    times = detect_population_spikes(m1, x0, 0.01, 100.0)
    assert times.shape == (1,)
    assert times[0] == pytest.approx(single, abs=1e-9)


def test_population_spikes_permutation_equivariance(thalamic_cycle):
    m = bl.coupled_thalamic(m=4)
    members = np.stack([thalamic_cycle.state_at_time(t) for t in (1.0, 2.5, 4.0, 6.0)])
    times = detect_population_spikes(m, bl.population_state(members), 0.01, 100.0)
    perm = [2, 0, 3, 1]
    times_p = detect_population_spikes(
        m, bl.population_state(members[perm]), 0.01, 100.0)
    assert np.allclose(times_p, times[perm], atol=1e-9)


def test_first_maximum_from_series():
    t = np.linspace(0.0, 4.0, 401)
    assert first_maximum_from_series(t, np.sin(t)) == pytest.approx(np.pi / 2, abs=1e-3)


def test_add_gaussian_noise_contract():
    x = np.array([1.0, -2.0])
    assert np.array_equal(add_gaussian_noise(x, NoiseSpec(0.0, 3), 7), x)
    a = add_gaussian_noise(x, NoiseSpec(0.5, 3), 7)
    b = add_gaussian_noise(x, NoiseSpec(0.5, 3), 7)
    assert np.array_equal(a, b)
    c = add_gaussian_noise(x, NoiseSpec(0.5, 3), 8)
    assert not np.array_equal(a, c)


def test_add_gaussian_noise_moments():
    x = np.zeros(2)
    sigma = 0.7
    draws = np.stack([add_gaussian_noise(x, NoiseSpec(sigma, 11), k)
                      for k in range(100_000)])
    assert np.max(np.abs(draws.mean(axis=0))) < 3 * sigma / np.sqrt(100_000)
    assert np.max(np.abs(draws.std(axis=0) - sigma)) < 0.02 * sigma


def test_trajectory_csv_round_trip(tmp_path):
    m = bl.duffing()
    traj = simulate(m, [0.2, -0.4], lambda x: 4.0 if x[1] < 0 else 0.0, 1.0, 0.01)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,x1,x2,u"
    assert path.read_text().splitlines()[-1].endswith(",")  # last row has no control
    back = read_trajectory_csv(path)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.controls, traj.controls)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(times=[0.0, 1.0], states=np.zeros((2, 2)), controls=np.zeros(2))
    with pytest.raises(ValueError):
        Trajectory(times=[0.0, 0.0], states=np.zeros((2, 2)), controls=np.zeros(1))
