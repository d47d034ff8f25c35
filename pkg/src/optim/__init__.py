"""
Optimization: AdamW, gradient clipping, learning-rate schedule.
"""

from src.optim.adamw import AdamW, Optimizer, OptimizerState, adamw_step, clip_global_norm, global_norm
from src.optim.schedule import Schedule, schedule_lr

__all__ = [
    "AdamW",
    "Optimizer",
    "OptimizerState",
    "adamw_step",
    "clip_global_norm",
    "global_norm",
    "Schedule",
    "schedule_lr",
]
