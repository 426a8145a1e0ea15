"""Confidence intervals for PD, PFI and SHAP explanations under missing data."""

__version__ = "0.1.0"
