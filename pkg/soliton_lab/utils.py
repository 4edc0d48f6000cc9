import json
from typing import (
    Any,
)

from Crypto.Hash import (
    keccak,
)
import numpy as np

keccak256 = lambda x: keccak.new(digest_bits=256, data=x).digest()  # noqa: E731


def to_builtin(value: Any) -> Any:
    # numpy scalars and arrays -> plain python, so reports serialize deterministically
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.complexfloating, complex)):
        return {'re': float(value.real), 'im': float(value.imag)}
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(to_builtin(value), sort_keys=True, separators=(',', ':'))


def digest_hex(data: bytes) -> str:
    return '0x' + keccak256(data).hex()


def relative_error(value: float, reference: float) -> float:
    scale = abs(reference)
    if scale == 0.0:
        return abs(value)
    return abs(value - reference) / scale
