# aoi_priority/serialize.py

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel


def to_jsonable(obj):
    """
    Convert results into JSON-safe values.
    Non-finite floats become None.
    """
    if obj is None:
        return None

    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump())

    if isinstance(obj, Enum):
        return obj.value

    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]

    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())

    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}

    if isinstance(obj, (list, tuple)):
        return [to_jsonable(i) for i in obj]

    if isinstance(obj, bool):
        return obj

    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None

    if isinstance(obj, (int, str)):
        return obj

    # Fallback: string representation
    return str(obj)
