"""
cyberguard - multilabel abusive-comment classifier

A transformer encoder feeding a stacked LSTM, trained from scratch on a
numpy autograd engine, with resampling, a multilabel evaluation suite,
k-fold cross-validation and LIME-style per-label explanations.
"""

__version__ = "1.0.0"

LABELS = ("bully", "sexual", "religious", "threat", "spam")

__all__ = ["LABELS", "__version__"]
