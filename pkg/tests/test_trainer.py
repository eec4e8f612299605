import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optoperceptron.errors import ConfigurationError
from optoperceptron.patterns import Pattern, build_dataset
from optoperceptron.trainer import (
    Action,
    TrainerConfig,
    VectorBackend,
    classify,
    evaluate_patterns,
    evaluate_test,
    pattern_output,
    sample_eta,
    train,
    update_weights,
)


def pat(bits, cls="v", pid=None, variant=0):
    role = "test" if variant == 1 else "train"
    return Pattern(pid or f"{cls}{variant}", cls, variant, role, tuple(bits))


def test_output_zero_inputs():
    assert pattern_output([0.5] * 9, pat([0] * 9)) == 0.0


def test_output_counts_active_inputs():
    p = pat([1, 1, 1, 0, 0, 0, 0, 0, 1])
    assert pattern_output([0.5] * 9, p) == pytest.approx(2.0)


def test_output_basis_vector():
    assert pattern_output([1] + [0] * 8, pat([1] * 9)) == 1.0


def test_output_length_mismatch():
    with pytest.raises(ValueError):
        pattern_output([0.5] * 8, pat([0] * 9))


def test_classify_target_above_accepts():
    assert classify(2.5 + 1e-9, 2.5, "v", "v") is Action.ACCEPT
    assert classify(2.4, 2.5, "v", "v") is Action.RAISE_OUTPUT


def test_classify_other_below_accepts():
    assert classify(2.5 + 1e-9, 2.5, "z", "v") is Action.LOWER_OUTPUT
    assert classify(2.4, 2.5, "z", "v") is Action.ACCEPT


def test_classify_tie_never_accepts():
    assert classify(2.5, 2.5, "v", "v") is Action.RAISE_OUTPUT
    assert classify(2.5, 2.5, "z", "v") is Action.LOWER_OUTPUT


@given(
    st.floats(-10, 10),
    st.floats(0.1, 10),
    st.floats(0.001, 1000),
    st.sampled_from(["z", "v", "n"]),
)
def test_classify_scale_invariant(output, threshold, k, cls):
    assert classify(output, threshold, cls, "v") is classify(
        output * k, threshold * k, cls, "v"
    )


def test_update_leaves_inactive_weights():
    w = update_weights([0.5] * 9, pat([0] * 9), Action.RAISE_OUTPUT, 0.01)
    assert w == [0.5] * 9


def test_update_single_active_input():
    p = pat([1] + [0] * 8)
    w = update_weights([0.5] * 9, p, Action.RAISE_OUTPUT, 0.01)
    assert w[0] == pytest.approx(0.51)
    assert w[1:] == [0.5] * 8


def test_update_raise_then_lower_restores():
    p = pat([1, 0, 1, 0, 1, 0, 1, 0, 1])
    w0 = [0.37] * 9
    w1 = update_weights(w0, p, Action.RAISE_OUTPUT, 0.013)
    w2 = update_weights(w1, p, Action.LOWER_OUTPUT, 0.013)
    assert w2 == w0


def test_update_rejects_bad_eta_and_direction():
    with pytest.raises(ValueError):
        update_weights([0.5] * 9, pat([1] * 9), Action.RAISE_OUTPUT, 0.0)
    with pytest.raises(ValueError):
        update_weights([0.5] * 9, pat([1] * 9), Action.ACCEPT, 0.01)


def test_sample_eta_in_half_open_interval():
    rng = np.random.default_rng(0)
    draws = [sample_eta(rng, 0.014) for _ in range(1000)]
    assert all(0.0 < eta <= 0.014 for eta in draws)


def test_sample_eta_deterministic_per_seed():
    a = [sample_eta(np.random.default_rng(3), 0.014) for _ in range(10)]
    b = [sample_eta(np.random.default_rng(3), 0.014) for _ in range(10)]
    assert a == b


def test_sample_eta_mean():
    rng = np.random.default_rng(1)
    draws = np.array([sample_eta(rng, 0.014) for _ in range(100_000)])
    assert abs(draws.mean() - 0.007) / 0.007 < 0.02


def test_fixed_point_dataset_accepts_everything():
    # v has >= 6 active inputs on every variant, z and n at most 4: with
    # w = 0.5 and b = 2.5 every pattern is already on its desired side
    bitmaps = {
        "z": ("100", "010", "001"),
        "v": ("111", "101", "111"),
        "n": ("001", "010", "100"),
    }
    dataset = build_dataset(bitmaps)
    config = TrainerConfig()
    trace = train(dataset, config, VectorBackend(config))
    assert trace.converged
    assert trace.total_steps == 24
    assert all(s.action == "accept" for s in trace.steps)
    assert trace.final_weights == (0.5,) * 9


def test_training_converges_and_orders_classes():
    dataset = build_dataset()
    config = TrainerConfig(rng_seed=11)
    backend = VectorBackend(config)
    trace = train(dataset, config, backend)
    assert trace.converged
    # converged means the last full pass was 24 accepts
    assert all(s.action == "accept" for s in trace.steps[-24:])
    results = evaluate_patterns(backend, dataset.training, "v")
    assert [r.correct for r in results] == [True] * 24


def test_training_deterministic_with_fixed_eta():
    dataset = build_dataset()
    config = TrainerConfig(eta_fixed=0.01)
    t1 = train(dataset, config, VectorBackend(config))
    t2 = train(dataset, config, VectorBackend(config))
    assert [(s.pattern_id, s.action, s.weights) for s in t1.steps] == [
        (s.pattern_id, s.action, s.weights) for s in t2.steps
    ]


def test_training_step_indices_consecutive():
    dataset = build_dataset()
    config = TrainerConfig(rng_seed=5)
    trace = train(dataset, config, VectorBackend(config))
    assert [s.step for s in trace.steps] == list(range(1, trace.total_steps + 1))


def test_updates_touch_only_active_indices():
    dataset = build_dataset()
    config = TrainerConfig(rng_seed=2)
    trace = train(dataset, config, VectorBackend(config))
    by_id = {p.pattern_id: p for p in dataset.training}
    previous = (config.initial_weight,) * 9
    for record in trace.steps:
        changed = {i for i in range(9) if record.weights[i] != previous[i]}
        active = set(by_id[record.pattern_id].active_indices)
        assert changed <= active
        if record.action == "accept":
            assert not changed
        previous = record.weights


def test_threshold_raise_path():
    # w2 must end negative for a clean pass (z superset of v), so every
    # clean pass triggers a raise and the run exhausts max_epochs
    patterns = (
        pat([1, 0, 0, 0, 0, 0, 0, 0, 0], cls="v", pid="v0"),
        pat([1, 1, 0, 0, 0, 0, 0, 0, 0], cls="z", pid="z0"),
    )
    dataset = build_dataset()
    config = TrainerConfig(
        initial_weight=0.05, initial_threshold=0.2, eta_fixed=0.3, max_epochs=30
    )
    backend = VectorBackend(config)
    trace = train(dataset, config, backend, training_patterns=patterns)
    assert not trace.converged
    assert trace.threshold_raises >= 1
    assert min(trace.final_weights) < 0
    # threshold never decreases over the run
    thresholds = [s.threshold for s in trace.steps]
    assert thresholds == sorted(thresholds)
    for r in trace.raises:
        assert r.new_threshold == pytest.approx(r.old_threshold * 1.05)


def test_max_epochs_returns_unconverged_trace():
    dataset = build_dataset()
    config = TrainerConfig(max_epochs=1, rng_seed=0)
    trace = train(dataset, config, VectorBackend(config))
    assert not trace.converged
    assert trace.epochs == 1


def test_evaluate_test_read_only_and_correct():
    dataset = build_dataset()
    config = TrainerConfig(rng_seed=19)
    backend = VectorBackend(config)
    trace = train(dataset, config, backend)
    assert trace.converged
    first = evaluate_test(trace.final_weights, trace.final_threshold, dataset.testing)
    second = evaluate_test(trace.final_weights, trace.final_threshold, dataset.testing)
    assert first == second
    assert all(r.correct for r in first)
    v_test = next(r for r in first if r.class_label == "v")
    assert v_test.output > trace.final_threshold


def test_trace_json_shape():
    dataset = build_dataset()
    config = TrainerConfig(rng_seed=1, max_epochs=2)
    trace = train(dataset, config, VectorBackend(config))
    import json

    payload = json.loads(trace.to_json())
    assert payload["summary"]["total_steps"] == trace.total_steps
    assert len(payload["steps"]) == trace.total_steps


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainerConfig(eta_max=0.0)
    with pytest.raises(ConfigurationError):
        TrainerConfig(initial_threshold=0.0)
    with pytest.raises(ConfigurationError):
        TrainerConfig(max_epochs=0)
    with pytest.raises(ConfigurationError):
        TrainerConfig(target_class="q")
