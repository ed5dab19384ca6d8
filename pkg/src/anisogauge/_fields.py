from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _fd
from .exceptions import DomainError


@dataclass(frozen=True)
class ScalarField:
    """A scalar function on R^d evaluated row-wise on ``(n, d)`` arrays.

    ``gradient`` is optional; without it gradients come from central
    differences. ``singular`` returns a boolean mask of rows where the field
    is not smooth (e.g. its pole); operators refuse to evaluate there.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    singular: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, x):
        return self.value(np.atleast_2d(x))

    def grad(self, x):
        x = np.atleast_2d(x)
        if self.gradient is not None:
            return self.gradient(x)
        return _fd.gradient(self.value, x)

    def check_smooth(self, x):
        if self.singular is not None and np.any(self.singular(np.atleast_2d(x))):
            raise DomainError(f"field {self.name or '<anonymous>'} is not smooth at the requested point")


def as_field(u):
    if isinstance(u, ScalarField):
        return u
    if callable(u):
        return ScalarField(value=u)
    raise TypeError(f"expected a ScalarField or callable, got {type(u).__name__}")
