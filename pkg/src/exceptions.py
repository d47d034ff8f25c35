"""
Exception hierarchy for cyberguard.

Every error raised on purpose by the package derives from CyberguardError so
the CLI can tell runtime failures (exit 1) from usage problems (exit 2).
"""

from typing import Dict, Optional


class CyberguardError(Exception):
    """Base class for all package errors."""


class ConfigError(CyberguardError, ValueError):
    """Invalid configuration value or combination."""


class DimensionError(CyberguardError, ValueError):
    """Tensor shapes do not agree for an operation."""


class DatasetFormatError(CyberguardError):
    """Malformed dataset file."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ResamplingError(CyberguardError):
    """Resampling is impossible for the given training split."""


class VocabularyError(CyberguardError):
    """Vocabulary file or construction problem."""


class CheckpointError(CyberguardError):
    """Base class for checkpoint persistence failures."""


class CheckpointVersionError(CheckpointError):
    """Bad magic bytes or unsupported format version."""


class CheckpointShapeError(CheckpointError):
    """Stored parameter shape disagrees with the configured model."""


class CheckpointTruncatedError(CheckpointError):
    """Checkpoint file ended before all records were read."""


class NonFiniteLossError(CyberguardError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ExplanationError(CyberguardError):
    """The explainer cannot build an explanation for the given input."""
