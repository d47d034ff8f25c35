"""
Linear warmup followed by linear decay to zero.
"""

import logging
from dataclasses import dataclass

from src.exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Schedule:
    """Learning-rate multiplier over `total_steps` optimizer updates."""

    total_steps: int
    warmup_ratio: float = 0.1

    def __post_init__(self):
        if self.total_steps < 0:
            raise ConfigError(f"total_steps must be >= 0, got {self.total_steps}")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ConfigError(f"warmup_ratio must be in [0, 1], got {self.warmup_ratio}")

    @property
    def warmup_steps(self) -> int:
        return int(round(self.warmup_ratio * self.total_steps))

    def multiplier(self, step: int) -> float:
        """
        0 -> 1 linearly over the warmup steps, then 1 -> 0 linearly at total_steps.

        Steps past the end clamp to 0 with a warning.
        """
        if step < 0:
            raise ConfigError(f"schedule step must be >= 0, got {step}")
        if step > self.total_steps:
            logger.warning(f"schedule step {step} beyond total {self.total_steps}; learning rate clamped to 0")
            return 0.0
        warmup = self.warmup_steps
        if step < warmup:
            return step / warmup
        if self.total_steps == warmup:
            return 1.0 if step < self.total_steps else 0.0
        return (self.total_steps - step) / (self.total_steps - warmup)


def schedule_lr(step: int, schedule: Schedule, base_lr: float) -> float:
    return base_lr * schedule.multiplier(step)
