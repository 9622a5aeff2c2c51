"""
nccz/core/serializable.py

Result objects that carry arrays write themselves out as plain dictionaries.
Numpy scalars, arrays and complex numbers inside those dictionaries are
converted with to_jsonable before they reach the json module.
"""
from abc import ABC, abstractmethod
from typing import Any, Dict

import numpy as np


class ISerializable(ABC):
    """Result object that reports itself as a JSON-compatible dictionary"""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


def to_jsonable(value: Any) -> Any:
    """
    Recursively replace numpy and complex values with JSON-compatible ones

    Complex numbers become [re, im] pairs, matching the matrix encoding of
    the field files.
    """
    if isinstance(value, ISerializable):
        return to_jsonable(value.to_dict())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value
