"""LMI and IQC tests for discrete-time impulsive systems, and estimator synthesis."""

__version__ = "0.1.0"
