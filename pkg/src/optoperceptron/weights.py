"""Background-referenced weight extraction and binary input gating.

A network weight is the fractional darkening of a readout region relative to
its cached background: w = (I_B - I_W) / I_B. Input gating works on raw
count sums: an active input contributes I_B - I_W, an inactive one
subtracts the background from itself and contributes exactly zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DegenerateBackgroundError


@dataclass
class ClampDiagnostics:
    """Counts of weight values pushed back into [0, 1] by noise."""

    low: int = 0
    high: int = 0

    @property
    def total(self) -> int:
        return self.low + self.high


def extract_weight(
    background_sum: float,
    written_sum: float,
    diagnostics: ClampDiagnostics | None = None,
) -> float:
    """(I_B - I_W) / I_B, clamped to [0, 1].

    Clamping events (noise pushing the raw ratio outside the unit interval)
    are tallied in diagnostics when given.
    """
    if background_sum <= 0:
        raise DegenerateBackgroundError(
            f"background sum must be positive, got {background_sum}"
        )
    if written_sum < 0:
        raise ValueError("written sum must be >= 0")
    w = (background_sum - written_sum) / background_sum
    if w < 0.0:
        if diagnostics is not None:
            diagnostics.low += 1
        return 0.0
    if w > 1.0:
        if diagnostics is not None:
            diagnostics.high += 1
        return 1.0
    return w


def gated_contribution(input_bit: int, background_sum: float, written_sum: float) -> float:
    """Weighted input on the raw counts scale.

    Bit 1 reads the weight against its background (B - W); bit 0 subtracts
    the background from itself (B - B) and contributes 0 regardless of sums.
    """
    if input_bit not in (0, 1):
        raise ValueError(f"input bit must be 0 or 1, got {input_bit}")
    if input_bit == 0:
        return 0.0
    if background_sum <= 0:
        raise DegenerateBackgroundError(
            f"background sum must be positive, got {background_sum}"
        )
    return background_sum - written_sum


def extract_threshold(threshold_background_sum: float, threshold_written_sum: float) -> float:
    """Classification threshold on the same counts scale as gated inputs."""
    if threshold_background_sum <= 0:
        raise DegenerateBackgroundError(
            f"threshold background sum must be positive, got {threshold_background_sum}"
        )
    return threshold_background_sum - threshold_written_sum


@dataclass
class WeightState:
    """Snapshot of the nine extracted weights plus the threshold."""

    background_sums: tuple[float, ...]
    written_sums: tuple[float, ...]
    weights: tuple[float, ...]
    threshold_background: float
    threshold_written: float
    threshold: float
    clamp_diagnostics: ClampDiagnostics = field(default_factory=ClampDiagnostics)

    @classmethod
    def from_sums(
        cls,
        background_sums,
        written_sums,
        threshold_background: float,
        threshold_written: float,
    ) -> "WeightState":
        backgrounds = tuple(float(v) for v in background_sums)
        writtens = tuple(float(v) for v in written_sums)
        if len(backgrounds) != len(writtens):
            raise ValueError("background and written sums must pair up")
        diagnostics = ClampDiagnostics()
        weights = tuple(
            extract_weight(b, w, diagnostics) for b, w in zip(backgrounds, writtens)
        )
        return cls(
            background_sums=backgrounds,
            written_sums=writtens,
            weights=weights,
            threshold_background=float(threshold_background),
            threshold_written=float(threshold_written),
            threshold=extract_threshold(threshold_background, threshold_written),
            clamp_diagnostics=diagnostics,
        )

    def contribution(self, index: int) -> float:
        """Count-scale weighted input of site `index` for an active bit."""
        return gated_contribution(
            1, self.background_sums[index], self.written_sums[index]
        )

    def to_json_dict(self) -> dict:
        return {
            "background_sums": list(self.background_sums),
            "written_sums": list(self.written_sums),
            "weights": list(self.weights),
            "threshold_background": self.threshold_background,
            "threshold_written": self.threshold_written,
            "threshold": self.threshold,
            "clamped_low": self.clamp_diagnostics.low,
            "clamped_high": self.clamp_diagnostics.high,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)
