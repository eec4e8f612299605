import itertools

import numpy as np
import pytest

from optoperceptron.config import load_config
from optoperceptron.optics import SpotGeometry
from optoperceptron.patterns import build_dataset, reduced_training
from optoperceptron.rig import (
    EnergyConfig,
    EnergyLedger,
    N_WEIGHT_SITES,
    RigBackend,
    ShutterModel,
    THRESHOLD_SITE,
    account_run,
    energy_per_pulse,
    shutter_event,
)
from optoperceptron.runner import build_rig, make_streams
from optoperceptron.synapse import response_curve
from optoperceptron.trainer import Action, StepRecord, TrainingTrace, VectorBackend, train


def quiet_overrides(**extra):
    base = {
        "camera.read_noise": "0",
        "shutter.jitter_enabled": "false",
        "synapse.site_spread": "0",
    }
    base.update({k: str(v) for k, v in extra.items()})
    return base


def make_rig(seed=0, **extra):
    cfg = load_config(overrides=quiet_overrides(**extra))
    return cfg, build_rig(cfg, make_streams(seed))


# -- shutter ------------------------------------------------------------------

def test_time_derived_counts_match_opening_window():
    model = ShutterModel(jitter_mode="time")
    rng = np.random.default_rng(0)
    counts = [shutter_event(rng, model) for _ in range(500)]
    assert all(15 <= c <= 25 for c in counts)
    assert len(set(counts)) > 3


def test_degenerate_opening_window():
    model = ShutterModel(open_time_min_ms=20, open_time_max_ms=20, jitter_mode="time")
    rng = np.random.default_rng(0)
    assert all(shutter_event(rng, model) == 20 for _ in range(20))


def test_relative_jitter_range_and_floor():
    model = ShutterModel(jitter_mode="relative")
    rng = np.random.default_rng(1)
    counts = [shutter_event(rng, model) for _ in range(2000)]
    assert all(1 <= c <= 50 for c in counts)
    assert min(counts) < 10  # the factor really spans (0, 1]
    assert max(counts) > 45


def test_jitter_disabled_is_nominal():
    model = ShutterModel(jitter_enabled=False)
    rng = np.random.default_rng(2)
    assert all(shutter_event(rng, model) == 50 for _ in range(10))


def test_shutter_deterministic_per_seed():
    model = ShutterModel()
    a = [shutter_event(np.random.default_rng(7), model) for _ in range(1)]
    b = [shutter_event(np.random.default_rng(7), model) for _ in range(1)]
    assert a == b


# -- energy -------------------------------------------------------------------

def beam():
    from optoperceptron.optics import BeamConfig

    return BeamConfig(average_power_w=0.56e-6, waist_diameter_um=100.0)


def test_energy_zero_spot():
    assert energy_per_pulse(beam(), SpotGeometry(0, 0, 0.0)) == 0.0


def test_energy_full_waist_is_full_pulse_energy():
    b = beam()
    assert energy_per_pulse(b, SpotGeometry(0, 0, 100.0)) == pytest.approx(b.pulse_energy_j)


def test_reference_spots_land_in_reported_window():
    small = energy_per_pulse(beam(), SpotGeometry(0, 0, 25.0))
    large = energy_per_pulse(beam(), SpotGeometry(0, 0, 40.0))
    assert 33e-12 <= small <= 96e-12
    assert 33e-12 <= large <= 96e-12


def test_ledger_totals_additive_and_order_independent():
    events = [("w1", 100, 50e-12), ("w2", 40, 50e-12), ("b", 7, 10e-12)]
    totals = set()
    for perm in itertools.permutations(events):
        ledger = EnergyLedger(per_read_j=0.4e-9)
        for site, pulses, cost in perm:
            ledger.add_write(site, pulses, cost)
        ledger.add_reads(3)
        totals.add((ledger.total_pulses, ledger.write_energy_j, ledger.read_energy_j))
    assert len(totals) == 1
    (pulses, write_j, read_j) = totals.pop()
    assert pulses == 147
    assert write_j == pytest.approx(140 * 50e-12 + 7 * 10e-12)
    assert read_j == 3 * 0.4e-9


def fake_trace(pulse_lists):
    trace = TrainingTrace()
    for i, pulses in enumerate(pulse_lists, start=1):
        trace.steps.append(
            StepRecord(
                step=i, pattern_id=f"p{i}", class_label="z", output=0.0,
                threshold=1.0, action="lower" if pulses else "accept",
                eta=None, pulses=pulses, weights=(0.0,) * 9,
            )
        )
    return trace


def test_account_run_zero_updates():
    ledger = account_run(fake_trace([None, None]), EnergyConfig(per_pulse_j=50e-12))
    assert ledger.write_energy_j == 0.0
    assert ledger.read_events == 0


def test_account_run_single_update():
    ledger = account_run(fake_trace([(60, 40)]), EnergyConfig(per_pulse_j=50e-12))
    assert ledger.write_energy_j == pytest.approx(5e-9)
    assert ledger.read_events == 2
    assert ledger.read_energy_j == 2 * 0.4e-9


def test_account_run_includes_initialization_when_configured():
    config = EnergyConfig(per_pulse_j=1e-12, initialization_pulses=25000, initialization_reads=20)
    ledger = account_run(fake_trace([None]), config)
    assert ledger.total_pulses == 25000
    assert ledger.read_events == 20


# -- rig sequencing -----------------------------------------------------------

def test_initialization_saturates_weight_sites():
    cfg, rig = make_rig()
    state = rig.initialize_network()
    for site in rig.sites:
        assert site.written_fraction == 1.0  # 2500 pulses >> 600-pulse knee
    # identical sites, noiseless: every weight sits at the same maximum,
    # the spot's share of the ROI darkening
    assert len(set(state.weights)) == 1
    expected = state.contribution(0) / state.background_sums[0]
    assert state.weights[0] == pytest.approx(expected)
    assert state.weights[0] > 0.2


def test_backgrounds_required_before_writing():
    from optoperceptron.synapse import Helicity

    cfg, rig = make_rig()
    rig._write_packets(0, Helicity.WRITE, 1)
    with pytest.raises(ValueError):
        rig.capture_backgrounds()


def test_unwritten_site_reads_background():
    cfg, rig = make_rig()
    backgrounds = rig.capture_backgrounds()
    sums = rig.read_sites(range(10))
    assert [sums[i] for i in range(10)] == backgrounds


def test_fully_written_site_reads_dark_area():
    cfg, rig = make_rig()
    rig.capture_backgrounds()
    from optoperceptron.synapse import Helicity

    rig._write_packets(0, Helicity.WRITE, 50)
    total = rig.read_sites([0])[0]
    dark = cfg["camera.dark_offset"]
    n_spot = int(rig._window_mask.sum())
    n_out = rig.window_roi.n_pixels - n_spot
    bright = rig.background_sums[0] / rig.window_roi.n_pixels
    assert total == n_spot * dark + n_out * bright


def test_fully_written_covering_spot_reads_pure_dark():
    # spot larger than the readout window: no probe light reaches any pixel
    cfg, rig = make_rig(**{"rig.spot_diameter_um": 30.0})
    rig.capture_backgrounds()
    from optoperceptron.synapse import Helicity

    rig._write_packets(5, Helicity.WRITE, 50)
    total = rig.read_sites([5])[5]
    assert total == cfg["camera.dark_offset"] * rig.window_roi.n_pixels


def test_read_is_pure_without_writes():
    cfg, rig = make_rig()
    rig.initialize_network()
    first = rig.read_sites([3])[3]
    second = rig.read_sites([3])[3]
    assert first == second


def test_read_updates_only_listed_sites():
    cfg, rig = make_rig()
    rig.initialize_network()
    cached = list(rig.written_sums)
    rig.sites[2] = rig.sites[2]  # no physical change
    rig.read_sites([2])
    assert rig.written_sums[:2] == cached[:2]
    assert rig.written_sums[3:] == cached[3:]


def test_site_addressing_is_bounded():
    cfg, rig = make_rig()
    rig.initialize_network()
    with pytest.raises(ValueError):
        rig.read_sites([10])
    with pytest.raises(ValueError):
        rig.apply_learning_update([THRESHOLD_SITE], Action.RAISE_OUTPUT)
    with pytest.raises(ValueError):
        rig.apply_learning_update([-1], Action.LOWER_OUTPUT)


def test_zero_init_packets_gives_zero_weights():
    cfg, rig = make_rig(**{})
    rig.config = rig.config.__class__(
        **{**rig.config.__dict__, "init_weight_packets": 0, "init_threshold_packets": 0}
    )
    state = rig.initialize_network()
    assert state.weights == (0.0,) * 9
    assert state.threshold == 0.0


def test_empty_learning_update_changes_nothing():
    cfg, rig = make_rig()
    rig.initialize_network()
    before = [s.accumulated_pulses for s in rig.sites]
    assert rig.apply_learning_update([], Action.LOWER_OUTPUT) == {}
    assert [s.accumulated_pulses for s in rig.sites] == before


def test_learning_update_moves_along_response_curve():
    # start mid-curve so two 50-pulse packets move m by a known amount
    cfg, rig = make_rig(**{"rig.init_weight_packets": 8})  # 400 pulses: mid-curve
    rig.initialize_network()
    site = rig.sites[4]
    n0 = site.accumulated_pulses
    assert n0 == 400
    expected = response_curve(n0 + 100, site.params)
    rig.apply_learning_update([4], Action.RAISE_OUTPUT)
    assert rig.sites[4].written_fraction == expected


def test_raise_then_lower_restores_exactly():
    cfg, rig = make_rig(**{"rig.init_weight_packets": 8})
    rig.initialize_network()
    m0 = rig.sites[1].written_fraction
    rig.apply_learning_update([1], Action.RAISE_OUTPUT)
    rig.apply_learning_update([1], Action.LOWER_OUTPUT)
    assert rig.sites[1].written_fraction == m0


def test_threshold_to_weight_ratio_in_linear_region():
    # 5x the packets must give 5x the count-scale value when the response
    # curve never leaves its proportional range
    cfg, rig = make_rig(
        **{
            "synapse.curve": "linear",
            "synapse.dead_zone_pulses": 0,
            "synapse.saturation_pulses": 25000,
        }
    )
    state = rig.initialize_network()
    weight_counts = state.contribution(0)
    ratio = state.threshold / weight_counts
    assert ratio == pytest.approx(5.0, rel=1e-3)
    # matches the simulation-mode convention b0 / w0 = 2.5 / 0.5
    assert ratio == pytest.approx(2.5 / 0.5, rel=1e-3)


def test_full_frame_renders_all_sites():
    cfg, rig = make_rig()
    rig.initialize_network()
    frame = rig.full_frame()
    assert frame.counts.shape == (cfg["camera.height_px"], cfg["camera.width_px"])
    # ten written spots must appear as dark disks on the bright background
    dark_pixels = int((frame.counts < 1000).sum())
    assert dark_pixels > 10 * 0.8 * rig._window_mask.sum()


def test_rig_ledger_counts_expected_events():
    cfg, rig = make_rig()
    rig.initialize_network()
    # 10 background reads + 10 initial reads; 9 * 50 + 250 write packets
    assert rig.ledger.read_events == 20
    assert len(rig.ledger.write_events) == 9 * 50 + 250
    assert rig.ledger.total_pulses == (9 * 50 + 250) * 50
    assert rig.ledger.read_energy_j == pytest.approx(20 * 0.4e-9)


# -- trainer backend on the rig -------------------------------------------------

def test_rig_backend_output_sums_active_contributions():
    cfg, rig = make_rig()
    config = cfg.trainer_config(seed=0)
    backend = RigBackend(rig, config)
    dataset = build_dataset(cfg.bitmaps)
    pattern = dataset.training[0]
    state = backend.weight_state()
    expected = sum(state.contribution(i) for i in pattern.active_indices)
    assert backend.output(pattern) == pytest.approx(expected)


def test_rig_backend_threshold_raise_is_multiplicative():
    cfg, rig = make_rig()
    backend = RigBackend(rig, cfg.trainer_config(seed=0))
    b0 = backend.threshold()
    backend.raise_threshold(1.05)
    assert backend.threshold() == pytest.approx(b0 * 1.05)


def test_reread_threshold_costs_one_read_per_call():
    cfg, rig = make_rig(**{"rig.reread_threshold": "true"})
    backend = RigBackend(rig, cfg.trainer_config(seed=0))
    before = rig.ledger.read_events
    backend.threshold()
    assert rig.ledger.read_events == before + 1


def test_emulated_training_converges_full_default_set():
    # keep the shutter jitter: its stochastic packet size is what breaks the
    # update limit cycles, exactly like the random learning rate in simulation
    cfg = load_config(overrides={"camera.read_noise": "0"})
    rig = build_rig(cfg, make_streams(4))
    config = cfg.trainer_config(seed=4)
    backend = RigBackend(rig, config)
    dataset = build_dataset(cfg.bitmaps)
    trace = train(dataset, config, backend)
    assert trace.converged
    assert all(s.action == "accept" for s in trace.steps[-24:])
    assert min(backend.weights()) >= 0.0


def test_emulated_training_converges_on_reduced_linear_set():
    cfg, rig = make_rig(
        **{
            "synapse.curve": "linear",
            "synapse.dead_zone_pulses": 0,
            "synapse.saturation_pulses": 25000,
        }
    )
    config = cfg.trainer_config(seed=4)
    backend = RigBackend(rig, config)
    dataset = build_dataset(cfg.bitmaps)
    reduced = reduced_training(dataset, per_class=2)
    trace = train(dataset, config, backend, training_patterns=reduced)
    assert trace.converged
    assert all(s.action == "accept" for s in trace.steps[-len(reduced):])
    assert min(backend.weights()) >= 0.0
