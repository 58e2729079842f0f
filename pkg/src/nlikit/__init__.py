"""Explainable native-language identification over annotated learner corpora."""

__version__ = "0.1.0"
