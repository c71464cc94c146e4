"""Python bindings for the fxgp GP/FX backtesting core."""

from ._fxgp import (
    ConfigError,
    DataError,
    Experiment,
    binom_p,
    combined_score,
    fitness_from_return,
    max_drawdown,
    moving_average,
    pearson,
    random_tree,
    tree_shape,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Experiment",
    "binom_p",
    "combined_score",
    "fitness_from_return",
    "max_drawdown",
    "moving_average",
    "pearson",
    "random_tree",
    "tree_shape",
]
