"""Gaussian-process scale estimation under Matérn covariance misspecification."""

__version__ = "0.1.0"
