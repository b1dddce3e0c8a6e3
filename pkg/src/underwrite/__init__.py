"""Credit scoring and underwriting as an ungeneralizable contextual logistic bandit."""

__version__ = "0.1.0"
