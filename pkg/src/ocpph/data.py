"""Sorted sample container shared by estimation, goodness of fit and I/O."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, InvalidInputError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Nondecreasing, finite, nonnegative observations.

    Any iterable of numbers is accepted; it is copied, validated and sorted.
    The stored array is read-only.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size == 0:
            raise DegenerateDataError("dataset is empty")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("dataset has non-finite values")
        if np.any(values < 0):
            raise InvalidInputError("dataset has negative values")
        values.sort()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def coerce(cls, data):
        return data if isinstance(data, cls) else cls(data)

    @property
    def m(self):
        return self.values.size

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, Dataset) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def scaled(self, factor):
        return Dataset(self.values * factor)
