import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from nonlocality import bohm
from nonlocality.bohm import BohmParams, Procedure, SpinorPacketState
from nonlocality.errors import StartOnNode, StepTooLarge

STD = SpinorPacketState()
REV = SpinorPacketState(procedure=Procedure.REVERSED)
nonzero_z = st.floats(0.01, 4.0).flatmap(lambda a: st.sampled_from([a, -a]))


def velocity_oracle(state, z, t):
    """Density-weighted drift computed directly from the two Gaussians."""
    s, v = state.sigma, state.up_velocity
    up = state.up_weight * np.exp(-((z - v * t) ** 2) / (2 * s**2))
    down = state.down_weight * np.exp(-((z + v * t) ** 2) / (2 * s**2))
    return (v * up - v * down) / (up + down)


def test_velocity_on_node_and_far_away():
    assert bohm.velocity_field(STD, 0.0, 2.0) == 0.0
    assert bohm.velocity_field(STD, 10.0, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert bohm.velocity_field(STD, -10.0, 1.0) == pytest.approx(-1.0, abs=1e-8)
    assert np.all(bohm.velocity_field(STD, np.linspace(-3, 3, 7), 0.0) == 0.0)


def test_velocity_matches_weighted_average(rng):
    z = rng.uniform(-3, 3, size=500)
    t = 1.3
    for state in (STD, REV, SpinorPacketState(up_weight=0.8, down_weight=0.2)):
        assert np.allclose(bohm.velocity_field(state, z, t), velocity_oracle(state, z, t), atol=1e-12)


def test_velocity_no_underflow_far_from_packets():
    v = bohm.velocity_field(STD, np.array([60.0, -60.0]), 0.5)
    assert np.all(np.isfinite(v)) and np.allclose(v, [1.0, -1.0])


def test_velocity_is_odd(rng):
    z = rng.uniform(-5, 5, size=1000)
    t = float(rng.uniform(0, 6))
    assert np.abs(bohm.velocity_field(STD, z, t) + bohm.velocity_field(STD, -z, t)).max() <= 1e-12


def test_scalar_and_array_paths_agree(rng):
    z = rng.uniform(-3, 3, size=50)
    arr = bohm.velocity_field(STD, z, 0.7)
    scal = np.array([bohm.velocity_field(STD, float(x), 0.7) for x in z])
    assert np.abs(arr - scal).max() <= 1e-15


@pytest.mark.parametrize(
    "z0, proc, raw, outcome",
    [(0.5, "standard", 1, 1), (0.5, "reversed", 1, -1), (-0.5, "standard", -1, -1), (-0.5, "reversed", -1, 1)],
)
def test_single_trajectory_outcomes(z0, proc, raw, outcome):
    traj = bohm.run_procedure(z0, Procedure(proc))
    assert traj.raw_sign == raw and traj.calibrated_outcome == outcome
    assert traj.times[0] == 0 and traj.times[-1] == pytest.approx(6.0)


def test_mirror_symmetry():
    a = bohm.run_procedure(0.8, Procedure.STANDARD)
    b = bohm.run_procedure(-0.8, Procedure.STANDARD)
    assert np.abs(a.positions + b.positions).max() <= 1e-15


def test_rk4_against_adaptive_integrator():
    traj = bohm.integrate_trajectory(STD, 0.3, 6.0, 1e-3)
    ref = solve_ivp(lambda t, z: [bohm.velocity_field(STD, z[0], t)], (0, 6), [0.3], method="DOP853", rtol=1e-12, atol=1e-12)
    assert abs(traj.positions[-1] - ref.y[0, -1]) <= 1e-8


def test_batch_matches_single():
    z0 = [-2.0, -0.1, 0.4, 3.0]
    batch = bohm.integrate_batch(STD, z0, 6.0, 1e-3)
    singles = [bohm.integrate_trajectory(STD, z, 6.0, 1e-3).positions[-1] for z in z0]
    assert np.abs(batch.final_z - singles).max() <= 1e-12


def test_run_validation():
    with pytest.raises(StartOnNode):
        bohm.integrate_trajectory(STD, 0.0, 6.0, 1e-3)
    with pytest.raises(StepTooLarge):
        bohm.integrate_trajectory(STD, 0.5, 6.0, 0.02)
    with pytest.raises(ValueError):
        bohm.integrate_trajectory(STD, 0.5, 2.0, 1e-3)
    with pytest.raises(ValueError):
        bohm.velocity_field(STD, 0.5, -1.0)
    with pytest.raises(ValueError):
        SpinorPacketState(sigma=0.0)


@settings(max_examples=20)
@given(z0=nonzero_z)
def test_no_crossing_property(z0):
    traj = bohm.run_procedure(z0, Procedure.STANDARD, BohmParams().coarsest())
    assert np.all(np.sign(traj.positions) == np.sign(z0))


def test_batch_preserves_order():
    z0 = np.linspace(-4, 4, 201)
    z0 = z0[z0 != 0]
    batch = bohm.integrate_batch(STD, z0, 6.0, 1e-2)
    assert np.all(np.diff(batch.final_z) > 0)
    assert batch.sign_changes == 0


@pytest.mark.parametrize("z0, expected", [(0.5, (1, -1)), (-1.2, (-1, 1))])
def test_contextuality_demo(z0, expected):
    assert bohm.contextuality_demo(z0) == expected


def test_contextuality_sweep():
    for z0 in np.linspace(0.05, 3.0, 20):
        for z in (z0, -z0):
            a, b = bohm.contextuality_demo(z, BohmParams().coarsest())
            assert a * b == -1


def test_born_ensemble_small():
    params = BohmParams().coarsest()
    one = bohm.born_ensemble(params, 1, rng_seed=3)
    assert one.up_freq in (0.0, 1.0)
    std = bohm.born_ensemble(params, 10_000, rng_seed=1)
    rev = bohm.born_ensemble(params, 10_000, rng_seed=1, procedure="reversed")
    assert np.array_equal(std.raw_signs, rev.raw_signs)
    assert std.up_freq + rev.up_freq == pytest.approx(1.0)
    assert abs(std.up_freq - 0.5) <= 5 * 0.5 / 100
    assert std.to_json() == {"n": 10_000, "up_freq": std.up_freq, "seed": 1}
    with pytest.raises(ValueError):
        bohm.born_ensemble(params, 0)


@pytest.mark.parametrize("za0", [0.5, -0.5, 2.0])
def test_two_particle_dependence(za0):
    params = BohmParams().coarsest()
    std = bohm.two_particle_demo(za0, "standard", params)
    rev = bohm.two_particle_demo(za0, "reversed", params)
    assert std.b_inputs == rev.b_inputs
    assert std.a_outcome == -rev.a_outcome
    assert std.b_outcome == -rev.b_outcome
    # singlet: B always reports the opposite of A
    assert std.b_outcome == -std.a_outcome


def test_trajectory_outputs():
    traj = bohm.run_procedure(0.5, Procedure.REVERSED, BohmParams().coarsest())
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,z" and len(lines) == len(traj.times) + 1
    assert traj.manifest() == {"procedure": "reversed", "z0": 0.5, "raw_sign": 1, "outcome": -1}
    assert traj.samples[0] == (0.0, 0.5)
