"""Python bindings for the lifesat core."""

from ._core import (
    SCHEMA_VERSION,
    LifesatError,
    SurveyService,
    aggregate,
    chained_solve,
    cronbach_alpha,
    estimate,
    ladder,
    lambda_from_bracket,
    lambda_from_prime,
    lambda_prime,
    mann_whitney,
    pearson,
    probability_weight,
    report,
    simulate,
)

__all__ = [
    "SCHEMA_VERSION",
    "LifesatError",
    "SurveyService",
    "aggregate",
    "chained_solve",
    "cronbach_alpha",
    "estimate",
    "ladder",
    "lambda_from_bracket",
    "lambda_from_prime",
    "lambda_prime",
    "mann_whitney",
    "pearson",
    "probability_weight",
    "report",
    "simulate",
]
