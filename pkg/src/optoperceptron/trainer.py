"""Supervised perceptron loop with stochastic learning rates.

One learning step is one pattern evaluation: the output (a weighted sum of
the pattern's binary inputs) is compared against the threshold, and on a
miss exactly one signed update eta * x is applied before moving to the next
pattern. Epochs repeat until a full clean pass; if any weight then sits
below zero the threshold is raised and training continues.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigurationError
from .patterns import CLASSES, Dataset, Pattern


class Action(enum.Enum):
    ACCEPT = "accept"
    RAISE_OUTPUT = "raise"
    LOWER_OUTPUT = "lower"


@dataclass(frozen=True)
class TrainerConfig:
    initial_weight: float = 0.5
    initial_threshold: float = 2.5
    eta_max: float = 0.014
    eta_fixed: float | None = None
    max_epochs: int = 500
    target_class: str = "v"
    threshold_raise: float = 0.05
    reset_weights_on_raise: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.eta_max <= 0:
            raise ConfigurationError("eta_max must be > 0")
        if self.eta_fixed is not None and not 0 < self.eta_fixed:
            raise ConfigurationError("eta_fixed must be > 0 when set")
        if self.initial_threshold <= 0:
            raise ConfigurationError("initial_threshold must be > 0")
        if self.max_epochs < 1:
            raise ConfigurationError("max_epochs must be >= 1")
        if self.target_class not in CLASSES:
            raise ConfigurationError(f"target_class must be one of {CLASSES}")
        if self.threshold_raise <= 0:
            raise ConfigurationError("threshold_raise must be > 0")


def pattern_output(weights: Sequence[float], pattern: Pattern) -> float:
    """Weighted sum of the pattern's inputs."""
    if len(weights) != len(pattern.inputs):
        raise ValueError(
            f"weight vector length {len(weights)} != input length {len(pattern.inputs)}"
        )
    return sum(w * x for w, x in zip(weights, pattern.inputs))


def classify(output: float, threshold: float, pattern_class: str, target_class: str) -> Action:
    """Accept, or the update direction needed to fix the output.

    Target-class patterns must land strictly above the threshold, all others
    strictly below; an exact tie is never accepted.
    """
    if pattern_class == target_class:
        return Action.ACCEPT if output > threshold else Action.RAISE_OUTPUT
    return Action.ACCEPT if output < threshold else Action.LOWER_OUTPUT


def update_weights(
    weights: Sequence[float], pattern: Pattern, direction: Action, eta: float
) -> list[float]:
    """w_i +- eta * x_i; only the pattern's active inputs move."""
    if direction not in (Action.RAISE_OUTPUT, Action.LOWER_OUTPUT):
        raise ValueError("direction must be RAISE_OUTPUT or LOWER_OUTPUT")
    if eta <= 0:
        raise ValueError("eta must be > 0")
    sign = 1.0 if direction is Action.RAISE_OUTPUT else -1.0
    return [w + sign * eta * x for w, x in zip(weights, pattern.inputs)]


def sample_eta(rng: np.random.Generator, eta_max: float) -> float:
    """Uniform draw from (0, eta_max]; deterministic per seeded rng."""
    if eta_max <= 0:
        raise ValueError("eta_max must be > 0")
    return eta_max * (1.0 - rng.random())


@dataclass
class StepRecord:
    step: int
    pattern_id: str
    class_label: str
    output: float
    threshold: float
    action: str
    eta: float | None
    pulses: tuple[int, ...] | None
    weights: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "step": self.step,
            "pattern_id": self.pattern_id,
            "class": self.class_label,
            "output": self.output,
            "threshold": self.threshold,
            "action": self.action,
            "eta": self.eta,
            "pulses": list(self.pulses) if self.pulses is not None else None,
            "weights": list(self.weights),
        }


@dataclass
class ThresholdRaise:
    after_step: int
    old_threshold: float
    new_threshold: float


@dataclass
class TrainingTrace:
    steps: list[StepRecord] = field(default_factory=list)
    raises: list[ThresholdRaise] = field(default_factory=list)
    epochs: int = 0
    converged: bool = False
    final_weights: tuple[float, ...] = ()
    final_threshold: float = 0.0

    @property
    def total_steps(self) -> int:
        return len(self.steps)

    @property
    def threshold_raises(self) -> int:
        return len(self.raises)

    def summary(self) -> dict:
        return {
            "total_steps": self.total_steps,
            "epochs": self.epochs,
            "threshold_raises": self.threshold_raises,
            "converged": self.converged,
            "final_weights": list(self.final_weights),
            "final_threshold": self.final_threshold,
        }

    def to_json(self) -> str:
        payload = {
            "summary": self.summary(),
            "raises": [
                {
                    "after_step": r.after_step,
                    "old_threshold": r.old_threshold,
                    "new_threshold": r.new_threshold,
                }
                for r in self.raises
            ],
            "steps": [s.to_json_dict() for s in self.steps],
        }
        return json.dumps(payload, sort_keys=True, indent=2)


@dataclass
class UpdateRecord:
    """What one weight update physically cost: eta, or delivered pulses."""

    eta: float | None = None
    pulses: tuple[int, ...] | None = None


class WeightBackend(Protocol):
    """Where the weights live: an abstract vector or the emulation rig."""

    def output(self, pattern: Pattern) -> float: ...

    def threshold(self) -> float: ...

    def apply_update(self, pattern: Pattern, direction: Action) -> UpdateRecord: ...

    def raise_threshold(self, factor: float) -> None: ...

    def weights(self) -> tuple[float, ...]: ...

    def reset_weights(self) -> None: ...


class VectorBackend:
    """Plain weight vector with sampled learning rates (simulation mode)."""

    def __init__(self, config: TrainerConfig, n_inputs: int = 9, rng=None):
        self.config = config
        self.n_inputs = n_inputs
        self._weights = [config.initial_weight] * n_inputs
        self._threshold = config.initial_threshold
        self._rng = rng if rng is not None else np.random.default_rng(config.rng_seed)

    def output(self, pattern: Pattern) -> float:
        return pattern_output(self._weights, pattern)

    def threshold(self) -> float:
        return self._threshold

    def apply_update(self, pattern: Pattern, direction: Action) -> UpdateRecord:
        if self.config.eta_fixed is not None:
            eta = self.config.eta_fixed
        else:
            eta = sample_eta(self._rng, self.config.eta_max)
        self._weights = update_weights(self._weights, pattern, direction, eta)
        return UpdateRecord(eta=eta)

    def raise_threshold(self, factor: float) -> None:
        self._threshold *= factor

    def weights(self) -> tuple[float, ...]:
        return tuple(self._weights)

    def reset_weights(self) -> None:
        self._weights = [self.config.initial_weight] * self.n_inputs


def train(
    dataset: Dataset,
    config: TrainerConfig,
    backend: WeightBackend,
    training_patterns: Sequence[Pattern] | None = None,
) -> TrainingTrace:
    """Run the supervised loop until a clean pass with non-negative weights.

    Patterns are visited in dataset order; a miss triggers exactly one
    update before the loop advances. After a clean pass, any negative weight
    raises the threshold and training continues. Hitting max_epochs returns
    an unconverged trace, not an error.
    """
    patterns = tuple(training_patterns) if training_patterns is not None else dataset.training
    trace = TrainingTrace()
    step = 0
    for epoch in range(1, config.max_epochs + 1):
        trace.epochs = epoch
        clean = True
        for pattern in patterns:
            step += 1
            output = backend.output(pattern)
            threshold = backend.threshold()
            action = classify(output, threshold, pattern.class_label, config.target_class)
            update = UpdateRecord()
            if action is not Action.ACCEPT:
                clean = False
                update = backend.apply_update(pattern, action)
            trace.steps.append(
                StepRecord(
                    step=step,
                    pattern_id=pattern.pattern_id,
                    class_label=pattern.class_label,
                    output=output,
                    threshold=threshold,
                    action=action.value,
                    eta=update.eta,
                    pulses=update.pulses,
                    weights=backend.weights(),
                )
            )
        if clean:
            weights = backend.weights()
            if min(weights) < 0:
                old = backend.threshold()
                backend.raise_threshold(1.0 + config.threshold_raise)
                trace.raises.append(ThresholdRaise(step, old, backend.threshold()))
                if config.reset_weights_on_raise:
                    backend.reset_weights()
            else:
                trace.converged = True
                break
    trace.final_weights = backend.weights()
    trace.final_threshold = backend.threshold()
    return trace


@dataclass
class EvalResult:
    pattern_id: str
    class_label: str
    role: str
    output: float
    threshold: float
    desired_above: bool
    correct: bool


def evaluate_patterns(
    backend: WeightBackend, patterns: Sequence[Pattern], target_class: str
) -> list[EvalResult]:
    """Read-only evaluation pass; never mutates the backend."""
    results = []
    for p in patterns:
        output = backend.output(p)
        threshold = backend.threshold()
        desired_above = p.class_label == target_class
        correct = output > threshold if desired_above else output < threshold
        results.append(
            EvalResult(
                pattern_id=p.pattern_id,
                class_label=p.class_label,
                role=p.role,
                output=output,
                threshold=threshold,
                desired_above=desired_above,
                correct=correct,
            )
        )
    return results


def evaluate_test(
    weights: Sequence[float],
    threshold: float,
    testing_patterns: Sequence[Pattern],
    target_class: str = "v",
) -> list[EvalResult]:
    """Classify held-out patterns with a fixed weight vector."""
    results = []
    for p in testing_patterns:
        output = pattern_output(weights, p)
        desired_above = p.class_label == target_class
        correct = output > threshold if desired_above else output < threshold
        results.append(
            EvalResult(
                pattern_id=p.pattern_id,
                class_label=p.class_label,
                role=p.role,
                output=output,
                threshold=threshold,
                desired_above=desired_above,
                correct=correct,
            )
        )
    return results
