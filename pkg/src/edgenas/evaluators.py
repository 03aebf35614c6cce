"""Accuracy evaluation: a deterministic desk-scale surrogate and an
external-process evaluator speaking the NDJSON wire protocol.

The surrogate maps every active parameter to its relative grid position,
mixes per-parameter cosine waves (coefficients frozen from a seed) with a
mild depth reward, and squashes through a logistic onto the observed
accuracy band [88.32, 99.49]. Lower-precision deployment subtracts a
per-precision delta before clamping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .protocol import ChannelTimeout, JsonLineChannel, ProtocolError
from .space import PARAM_ORDER, Configuration, SearchSpace, SpaceValidationError, validate

ACCURACY_FLOOR_PCT = 88.32
ACCURACY_CEILING_PCT = 99.49

# Defaults reproduce the published average-accuracy gaps between full-precision
# and FP16 deployments (98.88 vs 95.45); INT8 deployments matched full precision.
DEFAULT_SURROGATE_SEED = 49
DEPTH_REWARD = 0.3
_AMPLITUDE_RANGE = (0.45, 0.95)
_CYCLES_RANGE = (0.10, 0.40)


class Precision(str, Enum):
    FP32 = "fp32"
    FP16 = "fp16"
    INT8 = "int8"


DEFAULT_PRECISION_DELTAS = {
    Precision.FP32: 0.0,
    Precision.FP16: 3.43,
    Precision.INT8: 0.0,
}


class EvaluatorError(RuntimeError):
    """Evaluation failed for one configuration (recorded, not fatal)."""


@dataclass(frozen=True)
class AccuracyResult:
    accuracy_pct: float
    source: str  # "surrogate" | "external"
    config: Configuration
    precision: Precision

    def __post_init__(self):
        if not math.isfinite(self.accuracy_pct) or not 0.0 <= self.accuracy_pct <= 100.0:
            raise EvaluatorError(f"accuracy {self.accuracy_pct} outside [0, 100]")


class SurrogateEvaluator:
    """Pure stand-in for real training; deterministic in (config, precision, seed)."""

    def __init__(
        self,
        space: SearchSpace,
        seed: int = DEFAULT_SURROGATE_SEED,
        deltas: dict[Precision, float] | None = None,
        depth_reward: float = DEPTH_REWARD,
    ):
        self.space = space
        self.seed = seed
        self.deltas = dict(DEFAULT_PRECISION_DELTAS if deltas is None else deltas)
        self.depth_reward = depth_reward
        rng = np.random.default_rng(seed)
        self._coeffs: dict[str, tuple[float, float, float]] = {}
        for name in PARAM_ORDER:
            self._coeffs[name] = (
                float(rng.uniform(*_AMPLITUDE_RANGE)),
                float(rng.uniform(*_CYCLES_RANGE)),
                float(rng.uniform(0.0, 1.0)),
            )

    def _grid_position(self, name: str, value: int) -> float:
        grid = self.space.spec_for(name).grid
        if len(grid) == 1:
            return 0.5
        return grid.index(value) / (len(grid) - 1)

    def base_accuracy(self, config: Configuration) -> float:
        """Full-precision accuracy before any precision delta."""
        verdict = validate(config, self.space)
        if not verdict.valid:
            raise SpaceValidationError("; ".join(verdict.reasons))
        s = self.depth_reward * (config.block - 2) / 2.0
        for name in self.space.active_params(config.block):
            amplitude, cycles, phase = self._coeffs[name]
            x = self._grid_position(name, getattr(config, name))
            s += amplitude * math.cos(2.0 * math.pi * (cycles * x + phase))
        logistic = 1.0 / (1.0 + math.exp(-s))
        return ACCURACY_FLOOR_PCT + (ACCURACY_CEILING_PCT - ACCURACY_FLOOR_PCT) * logistic

    def evaluate(
        self,
        config: Configuration,
        precision: Precision = Precision.FP32,
        delta: float | None = None,
    ) -> AccuracyResult:
        if delta is None:
            delta = self.deltas[precision]
        accuracy = min(
            max(self.base_accuracy(config) - delta, ACCURACY_FLOOR_PCT), ACCURACY_CEILING_PCT
        )
        return AccuracyResult(accuracy, "surrogate", config, precision)


class ExternalEvaluator:
    """Bridges to a spawned evaluator process over line-delimited JSON.

    Request:  {"id": N, "cmd": "evaluate", "config": {...}, "precision": "fp16"}
    Response: {"id": N, "accuracy_pct": x} or {"id": N, "error": "message"}
    """

    def __init__(self, channel: JsonLineChannel, timeout_s: float | None = None):
        self.channel = channel
        self.timeout_s = timeout_s

    def evaluate(
        self, config: Configuration, precision: Precision = Precision.FP32
    ) -> AccuracyResult:
        try:
            response = self.channel.request(
                {
                    "cmd": "evaluate",
                    "config": config.to_json_dict(),
                    "precision": precision.value,
                },
                timeout_s=self.timeout_s,
            )
        except ChannelTimeout as exc:
            raise EvaluatorError(str(exc)) from exc
        if "error" in response:
            raise EvaluatorError(f"evaluator reported: {response['error']}")
        if "accuracy_pct" not in response:
            raise ProtocolError(f"response missing accuracy_pct: {response!r}")
        accuracy = float(response["accuracy_pct"])
        if not math.isfinite(accuracy) or not 0.0 <= accuracy <= 100.0:
            raise EvaluatorError(f"accuracy {accuracy} outside [0, 100]")
        return AccuracyResult(accuracy, "external", config, precision)

    def close(self) -> None:
        self.channel.close()
