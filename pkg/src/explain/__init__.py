"""
Per-label local surrogate explanations.
"""

from src.explain.lime_explainer import Explanation, explain_comment, fit_surrogate, perturb_samples

__all__ = ["Explanation", "explain_comment", "fit_surrogate", "perturb_samples"]
