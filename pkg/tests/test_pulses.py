"""Pulse-sequence evolution, effective segments, and the F1/F2 fidelities."""

import numpy as np
import pytest

from vecmag.spin import (
    EnsembleDims,
    FieldVector,
    collective_operator,
    expectation,
    fidelity,
    ghz_state,
    scs_state,
    unitary_from_generator,
)
from vecmag.pulses import (
    DDSchedule,
    EffectiveSegment,
    NoiseModel,
    _iter_pair_states,
    evolve_effective,
    evolve_exact,
    fidelity_f1,
    fidelity_f2,
    segments_for,
)

DIMS = EnsembleDims(10)
FIELD = FieldVector(4.0, 5.0, 6.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        DDSchedule("w", 10, 1e-3)
    with pytest.raises(ValueError):
        DDSchedule("x", 0, 1e-3)
    with pytest.raises(ValueError):
        DDSchedule("x", 10, 0.0)
    with pytest.raises(ValueError):
        DDSchedule("x", 10, 1e-3, mode="both")
    assert DDSchedule("x", 250, 0.004).duration == pytest.approx(2.0)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(eta=-0.1)
    with pytest.raises(ValueError):
        NoiseModel(eta=0.1, trials=0)


def test_empty_schedule_returns_input():
    s = ghz_state(DIMS)
    assert evolve_exact(s, FIELD, []) is s


def test_zero_field_pulse_pairs_cancel():
    s = scs_state(DIMS)
    for mode in ("alternating", "identical"):
        out = evolve_exact(s, FieldVector(0, 0, 0),
                           [DDSchedule("x", 50, 1e-3, mode)])
        assert fidelity(out, s) == pytest.approx(1.0, abs=1e-12)


def test_single_pair_first_order_expansion():
    # one alternating x pair acts as 1 - 2i Bx Jx tau + O(tau^2)
    jx = collective_operator(DIMS, "x").matrix
    psi0 = scs_state(DIMS).amplitudes

    def defect(tau):
        out = evolve_exact(scs_state(DIMS), FIELD, [DDSchedule("x", 1, tau)])
        approx = psi0 - 2j * FIELD.Bx * tau * (jx @ psi0)
        return np.linalg.norm(out.amplitudes - approx / np.linalg.norm(approx))

    d1, d2 = defect(1e-6), defect(2e-6)
    assert d1 < 1e-8
    assert 3.0 < d2 / d1 < 5.0


def test_selective_accumulation_transverse_leakage_quadratic():
    # after an x block, sensitivity to By and Bz is O((B tau)^2)
    jz = collective_operator(DIMS, "z")

    def leakage(tau):
        pairs = int(round(1.0 / (2 * tau)))
        base = evolve_exact(scs_state(DIMS), FieldVector(4.0, 0.0, 0.0),
                            [DDSchedule("x", pairs, tau)])
        bumped = evolve_exact(scs_state(DIMS), FieldVector(4.0, 3.0, 2.5),
                              [DDSchedule("x", pairs, tau)])
        return abs(expectation(bumped, jz) - expectation(base, jz))

    l1, l2 = leakage(5e-4), leakage(1e-3)
    assert l2 / l1 == pytest.approx(4.0, rel=0.35)


def test_exact_block_matches_effective_block():
    # spacing ratio 0.002 of the block keeps the x block faithful
    tau, pairs = 0.004, 250
    out = evolve_exact(scs_state(DIMS), FIELD, [DDSchedule("x", pairs, tau)])
    eff = evolve_effective(scs_state(DIMS),
                           [EffectiveSegment("x", 2 * pairs * tau, FIELD.Bx)])
    assert fidelity(out, eff) >= 0.999


def test_three_blocks_match_effective_at_fine_spacing():
    tau, pairs = 0.0004, 2500
    scheds = [DDSchedule(ax, pairs, tau) for ax in ("z", "y", "x")]
    out = evolve_exact(scs_state(DIMS), FIELD, scheds)
    eff = evolve_effective(scs_state(DIMS),
                           segments_for(FIELD, [("z", 2.0), ("y", 2.0), ("x", 2.0)]))
    assert fidelity(out, eff) >= 0.9999


def test_effective_segment_on_eigenstate_is_phase():
    s = scs_state(DIMS)
    out = evolve_effective(s, [EffectiveSegment("z", 1.3, 2.0)])
    assert fidelity(out, s) == pytest.approx(1.0, abs=1e-12)


def test_effective_x_segment_oscillates_at_coupling_frequency():
    jz = collective_operator(DIMS, "z")
    for t in (0.3, 0.8, 1.0):
        out = evolve_effective(scs_state(DIMS), [EffectiveSegment("x", t, 2.0)])
        assert expectation(out, jz) == pytest.approx(5 * np.cos(2 * t), abs=1e-10)


def test_segments_for_uses_gamma():
    segs = segments_for(FieldVector(1, 2, 3, gamma=2.0), [("y", 0.5)])
    assert segs == [EffectiveSegment("y", 0.5, 4.0)]


def test_alternating_and_identical_agree_without_noise():
    # exact pi pulses make the two modes equal up to a global phase,
    # because the inner pulses differ by e^{2 i pi J} = +-identity
    for N in (7, 10):
        dims = EnsembleDims(N)
        states = [evolve_exact(scs_state(dims), FIELD, [DDSchedule("y", 125, 2e-3, mode)])
                  for mode in ("alternating", "identical")]
        assert fidelity(*states) == pytest.approx(1.0, abs=1e-12)


def test_identical_mode_converges_to_effective_as_tau_shrinks():
    def gap(tau):
        pairs = int(round(0.5 / (2 * tau)))
        out = evolve_exact(scs_state(DIMS), FIELD,
                           [DDSchedule("y", pairs, tau, "identical")])
        eff = evolve_effective(scs_state(DIMS), [EffectiveSegment("y", 0.5, FIELD.By)])
        return 1.0 - fidelity(out, eff)

    assert gap(2e-4) < gap(2e-3) < gap(8e-3)
    assert gap(2e-4) < 1e-4


def test_norm_preserved_over_many_pairs():
    psi = scs_state(DIMS).amplitudes
    last = psi
    for last in _iter_pair_states(psi, DIMS, FIELD, [DDSchedule("x", 10000, 1e-4)],
                                  None, None):
        pass
    assert abs(np.linalg.norm(last) - 1.0) < 1e-10


def test_f1_rejects_bad_ratio():
    with pytest.raises(ValueError):
        fidelity_f1(DIMS, FIELD, None, [0.0])


def test_f1_curves_at_reference_ratios():
    curves = fidelity_f1(DIMS, FIELD, None, [0.0002, 0.002, 0.005])
    by_ratio = {c.tau_over_T: c for c in curves}
    assert by_ratio[0.0002].pairs_per_axis == 2500
    assert by_ratio[0.002].pairs_per_axis == 250
    assert by_ratio[0.005].pairs_per_axis == 100
    assert by_ratio[0.0002].minimum == pytest.approx(0.999979, abs=2e-6)
    assert by_ratio[0.002].minimum == pytest.approx(0.997869, abs=2e-6)
    assert by_ratio[0.005].minimum == pytest.approx(0.986664, abs=2e-6)
    # coarser spacing is strictly worse
    assert by_ratio[0.005].minimum < by_ratio[0.002].minimum < by_ratio[0.0002].minimum
    # time grid spans the three blocks
    assert by_ratio[0.002].times[-1] == pytest.approx(6.0)


def test_f1_explicit_pair_count_override():
    (curve,) = fidelity_f1(DIMS, FIELD, 50, [0.002])
    assert curve.pairs_per_axis == 50
    assert len(curve.times) == 150


def test_f2_zero_noise_is_unity():
    scheds = [DDSchedule("x", 200, 1e-3)]
    res = fidelity_f2(DIMS, FIELD, scheds, NoiseModel(eta=0.0, trials=3, seed=1))
    assert np.allclose(res.mean, 1.0, atol=1e-12)
    assert np.allclose(res.std, 0.0, atol=1e-12)


def test_f2_requires_schedules():
    with pytest.raises(ValueError):
        fidelity_f2(DIMS, FIELD, [], NoiseModel(eta=0.1))


def test_f2_deterministic_for_fixed_seed():
    scheds = [DDSchedule("z", 100, 1e-3)]
    noise = NoiseModel(eta=0.06 * np.pi, trials=4, seed=11)
    a = fidelity_f2(DIMS, FIELD, scheds, noise)
    b = fidelity_f2(DIMS, FIELD, scheds, noise)
    assert np.array_equal(a.mean, b.mean)
    assert np.array_equal(a.trial_minima, b.trial_minima)


def test_f2_paired_errors_cancel_at_zero_field():
    # with a shared draw per pair the alternating pulses undo each other exactly
    scheds = [DDSchedule("x", 100, 1e-3)]
    noise = NoiseModel(eta=0.3, trials=2, seed=3, paired_error=True)
    res = fidelity_f2(DIMS, FieldVector(0, 0, 0), scheds, noise)
    assert np.all(res.mean > 1.0 - 1e-12)


def test_f2_reference_scenario_alternating_beats_identical():
    results = {}
    for mode in ("alternating", "identical"):
        scheds = [DDSchedule(ax, 1000, 1e-3, mode) for ax in ("z", "y", "x")]
        noise = NoiseModel(eta=0.06 * np.pi, trials=20, seed=7, paired_error=True)
        results[mode] = fidelity_f2(DIMS, FIELD, scheds, noise)
    alt, ident = results["alternating"], results["identical"]
    assert alt.mean_trajectory_minimum == pytest.approx(0.993766, abs=2e-5)
    assert alt.mean_trajectory_minimum >= 0.99
    assert ident.mean_trajectory_minimum < 0.01
    wins = np.sum(alt.trial_minima >= ident.trial_minima)
    assert wins == 20
