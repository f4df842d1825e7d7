"""Benchmark right-hand sides and the manufactured solution."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ellq.errors import InvalidParameterError

PI = np.pi
CASE_LABELS = ("I", "II", "III", "IV")


def f_one(x, y):
    return 2 * PI**2 * np.sin(PI * x) * np.sin(PI * y)


def f_two(x, y):
    return f_one(x, y) + 2.5 * PI**2 * np.sin(2 * PI * x) * np.sin(PI * y)


def f_three(x, y):
    return (f_one(x, y)
            + 6.5 * PI**2 * np.sin(3 * PI * x) * np.sin(2 * PI * y)
            + 10.25 * PI**2 * np.sin(5 * PI * x) * np.sin(4 * PI * y))


def f_four(x, y):
    return np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / 0.1**2)


def u_exact(x, y):
    """Manufactured solution; ``-laplace(u_exact)`` is case III."""
    return (np.sin(PI * x) * np.sin(PI * y)
            + 0.5 * np.sin(3 * PI * x) * np.sin(2 * PI * y)
            + 0.25 * np.sin(5 * PI * x) * np.sin(4 * PI * y))


_EVALUATORS = {"I": f_one, "II": f_two, "III": f_three, "IV": f_four, "manufactured": f_three}


@dataclass(frozen=True)
class RhsCase:
    label: str
    evaluator: Callable

    def __call__(self, x, y):
        return self.evaluator(x, y)


def rhs_case(label: str) -> RhsCase:
    key = str(label).strip()
    if key.lower() == "manufactured":
        key = "manufactured"
    elif key.upper() in _EVALUATORS:
        key = key.upper()
    if key not in _EVALUATORS:
        raise InvalidParameterError(f"unknown right-hand side {label!r}; choose from {sorted(_EVALUATORS)}")
    return RhsCase(key, _EVALUATORS[key])
