import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingersense import presets
from fingersense.errors import ScenarioValidationError, StreamOrderError
from fingersense.formats import format_trial_csv
from fingersense.signal import power_loss
from fingersense.simfinger import (
    Contact,
    ContactState,
    Disturbance,
    ScenarioKind,
    SensorSpec,
    SimScenario,
    TrialLog,
    contact_flags,
    joint_angles_from_pulley,
    run_scenario,
    sense,
)

THIRDS = (1 / 3, 1 / 3, 1 / 3)


def enumerate_sweep_readings(pulley_range, step, repeats):
    """Count readings by walking the protocol: rest reading, then per move one mid-move and one settled reading."""
    count = 0
    for _ in range(repeats):
        for _direction in ("loading", "unloading"):
            count += 1
            position = 0.0
            while position < pulley_range - 1e-9:
                target = min(position + step, pulley_range)
                count += 2
                position = target
    return count


def stepwise_angles(p_target, weights, limits, frozen, p_contact, kappa=1.0, dp=0.01):
    """Scalar loop: advance the pulley in small steps and hand each increment to the joints one at a time."""
    theta = [min(w * p_contact * kappa, lim) for w, lim in zip(weights, limits)]
    w_free = sum(w for w, f in zip(weights, frozen) if not f)
    p = p_contact
    while p < p_target - 1e-12:
        d = min(dp, p_target - p)
        for j in range(3):
            if not frozen[j]:
                theta[j] = min(theta[j] + d * kappa * weights[j] / w_free, limits[j])
        p += d
    return theta


class TestJointAngles:
    def test_zero(self):
        np.testing.assert_array_equal(joint_angles_from_pulley(0, THIRDS, (90, 90, 90)), [0, 0, 0])

    def test_equal_split(self):
        np.testing.assert_allclose(joint_angles_from_pulley(90, THIRDS, (90, 90, 90)), [30, 30, 30])

    def test_limits_cap(self):
        np.testing.assert_allclose(joint_angles_from_pulley(600, THIRDS, (90, 48, 90)), [90, 48, 90])

    def test_frozen_dip_redistributes_to_free_joints(self):
        state = ContactState(frozen=(False, False, True), pulley_at_contact=60.0, angles_at_contact=(20.0, 20.0, 20.0))
        got = joint_angles_from_pulley(90.0, THIRDS, (90, 90, 90), state)
        np.testing.assert_allclose(got, [35.0, 35.0, 20.0], atol=1e-12)
        want = stepwise_angles(90.0, THIRDS, (90, 90, 90), (False, False, True), 60.0)
        np.testing.assert_allclose(got, want, atol=1e-9)

    @given(
        st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=3, max_size=3),
        st.floats(min_value=0, max_value=200),
        st.floats(min_value=0, max_value=200),
        st.sampled_from([(True, False, False), (False, True, False), (False, False, True), (False, True, True)]),
        st.lists(st.floats(min_value=10, max_value=90), min_size=3, max_size=3),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_step_loop_and_respects_limits(self, raw_w, p_c, extra, frozen, limits):
        w = np.array(raw_w) / sum(raw_w)
        at_contact = joint_angles_from_pulley(p_c, w, limits)
        state = ContactState(frozen=frozen, pulley_at_contact=p_c, angles_at_contact=tuple(at_contact))
        got = joint_angles_from_pulley(p_c + extra, w, limits, state)
        want = stepwise_angles(p_c + extra, w, limits, frozen, p_c, dp=0.5)
        np.testing.assert_allclose(got, want, atol=1e-9)
        assert np.all(got >= 0) and np.all(got <= np.array(limits) + 1e-12)
        for j in range(3):
            if frozen[j]:
                assert got[j] == at_contact[j]


class TestSense:
    def test_rest_reading_is_i0(self, rng):
        assert sense(0.0, SensorSpec(i0=1000), False, rng) == 1000.0

    def test_closed_form_loss(self, rng):
        i = sense(100.0, SensorSpec(beta1_true=0.02, i0=1000), False, rng)
        assert i == pytest.approx(1000 * 10 ** -0.2, rel=1e-15)
        assert power_loss(i, 1000) == pytest.approx(2.0, abs=1e-12)

    def test_gain_gives_negative_loss(self, rng):
        i = sense(0.0, SensorSpec(beta1_true=0.02, i0=1000), False, rng, gain=2.0)
        assert power_loss(i, 1000) == pytest.approx(-3.0103, abs=1e-4)

    def test_hysteresis_on_unloading_only(self, rng):
        spec = SensorSpec(hysteresis_offset=0.5)
        assert power_loss(sense(0.0, spec, True, rng), spec.i0) == pytest.approx(0.5)
        assert power_loss(sense(0.0, spec, False, rng), spec.i0) == 0.0

    def test_invalid_specs(self):
        with pytest.raises(ScenarioValidationError):
            SensorSpec(noise_sigma=-1)
        with pytest.raises(ScenarioValidationError):
            SensorSpec(i0=0)


class TestScenarios:
    def test_sweep_record_count_matches_enumeration(self):
        log = run_scenario(SimScenario(), [SensorSpec()] * 3)
        assert len(log) == enumerate_sweep_readings(263.6, 0.44, 5) == 12010

    @pytest.mark.parametrize("rng_, step, repeats", [(10.0, 1.0, 1), (10.0, 3.0, 2), (263.6, 0.44, 1)])
    def test_record_count_other_grids(self, rng_, step, repeats):
        log = run_scenario(SimScenario(pulley_range=rng_, pulley_step=step, repeats=repeats), [SensorSpec()] * 3)
        assert len(log) == enumerate_sweep_readings(rng_, step, repeats)

    def test_sweep_phases_and_time(self):
        log = run_scenario(SimScenario(repeats=1), [SensorSpec()] * 3)
        assert log.unloading.sum() == len(log) // 2
        np.testing.assert_allclose(np.diff(log.t), 1 / 8)
        assert log.pulley.max() == pytest.approx(263.6)

    def test_same_seed_bit_identical(self):
        a = run_scenario(presets.rig_sweep(seed=5), presets.rig_finger_specs(0))
        b = run_scenario(presets.rig_sweep(seed=5), presets.rig_finger_specs(0))
        assert a == b
        assert format_trial_csv(a) == format_trial_csv(b)

    def test_different_seed_differs(self):
        a = run_scenario(presets.rig_sweep(seed=5, repeats=1), presets.rig_finger_specs(0))
        b = run_scenario(presets.rig_sweep(seed=6, repeats=1), presets.rig_finger_specs(0))
        assert not a == b

    def test_contact_flags_flip_at_expected_samples(self):
        sc = presets.contact_scenario()
        log = run_scenario(sc, presets.rig_finger_specs(2))
        flags = contact_flags(sc, log.t)
        changes = np.flatnonzero(np.diff(flags.astype(int))) + 1
        assert list(changes) == [6, 98]
        assert np.floor(0.7 * 8) + 1 == 6 and np.floor(12.2 * 8) + 1 == 98

    def test_contact_freezes_joint(self):
        sc = presets.contact_scenario()
        log = run_scenario(sc, presets.rig_finger_specs(2))
        held = log.theta[contact_flags(sc, log.t), 2]
        assert np.all(held == held[0])
        assert np.all(log.theta <= 48.0 + 1e-12) and np.all(log.theta >= 0)

    def test_release_before_contact_rejected(self):
        with pytest.raises(ScenarioValidationError):
            Contact(t_contact=5.0, t_release=1.0)

    def test_bad_weights_rejected(self):
        with pytest.raises(ScenarioValidationError):
            SimScenario(coupling_weights=(0.5, 0.5, 0.5))

    def test_bad_step_rejected(self):
        with pytest.raises(ScenarioValidationError):
            SimScenario(pulley_step=0)

    def test_disturbance_gain_below_one_rejected(self):
        with pytest.raises(ScenarioValidationError):
            Disturbance(gain=0.9)

    def test_stress_cycle_count(self):
        sc = presets.stress_scenario(seed=1)
        log = run_scenario(sc, presets.rig_finger_specs(1))
        assert sc.kind is ScenarioKind.STRESS_CYCLES
        assert log.t[-1] < 450 / 1.46 <= log.t[-1] + 1 / 8

    def test_loading_loss_monotone_when_noiseless(self):
        log = run_scenario(SimScenario(repeats=1), [SensorSpec(beta1_true=0.03)] * 3)
        loss = log.losses()
        load = ~log.unloading
        assert np.all(np.diff(loss[load], axis=0) >= 0)

    def test_undisturbed_angles_within_limits(self):
        log = run_scenario(presets.rig_sweep(seed=3), presets.rig_finger_specs(1))
        assert np.all(log.theta >= 0) and np.all(log.theta <= 48.0 + 1e-12)

    def test_single_sensor_copies_channel(self):
        log = run_scenario(presets.rig_sweep(seed=2, repeats=1, single_sensor=True), [presets.SINGLE_SENSOR_SPEC])
        np.testing.assert_array_equal(log.intensity[:, 0], log.intensity[:, 1])
        np.testing.assert_array_equal(log.intensity[:, 0], log.intensity[:, 2])


class TestTrialLog:
    def test_rejects_non_increasing_time(self):
        with pytest.raises(StreamOrderError):
            TrialLog(t=np.array([0.0, 0.0]), pulley=np.zeros(2), theta=np.zeros((2, 3)), intensity=np.ones((2, 3)),
                     unloading=np.zeros(2, bool))

    def test_arrays_read_only(self):
        log = run_scenario(SimScenario(repeats=1, pulley_range=4.4), [SensorSpec()] * 3)
        with pytest.raises(ValueError):
            log.t[0] = 1.0

    def test_records_view(self):
        log = run_scenario(SimScenario(repeats=1, pulley_range=4.4), [SensorSpec()] * 3)
        first = next(iter(log.records()))
        assert first["phase"] == "loading" and first["t"] == 0.0
