"""Efficient multi-level quantile regression (TQE, SEF, EFF)."""

from ._effqr import (
    Error,
    bootstrap,
    estimate,
    fit_quantile,
    generate,
    pinball_loss,
    selftest,
    simulate,
    true_beta,
)

__all__ = [
    "Error",
    "bootstrap",
    "estimate",
    "fit_quantile",
    "generate",
    "pinball_loss",
    "selftest",
    "simulate",
    "true_beta",
]
