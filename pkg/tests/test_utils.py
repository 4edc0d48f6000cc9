import math

import numpy as np
import pytest

from soliton_lab.utils import (
    canonical_json,
    digest_hex,
    relative_error,
    to_builtin,
)


def test_to_builtin_converts_numpy_values():
    value = {
        1: np.arange(3),
        'flag': np.bool_(True),
        'pair': (np.float64(0.5), np.int32(2)),
        'z': np.complex128(1 - 2j),
    }
    assert to_builtin(value) == {
        '1': [0, 1, 2],
        'flag': True,
        'pair': [0.5, 2],
        'z': {'re': 1.0, 'im': -2.0},
    }
    assert type(to_builtin(np.float32(0.25))) is float


def test_canonical_json_is_sorted_and_compact():
    assert canonical_json({'b': 1, 'a': [np.float64(2.0)]}) == '{"a":[2.0],"b":1}'


def test_digest_of_empty_input():
    assert digest_hex(b'') == (
        '0xc5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470'
    )


@pytest.mark.parametrize('value,reference,expected', [
    (1.1, 1.0, 0.1),
    (-2.0, -1.0, 1.0),
    (1e-3, 0.0, 1e-3),
    (0.0, 0.0, 0.0),
])
def test_relative_error(value, reference, expected):
    assert math.isclose(relative_error(value, reference), expected, abs_tol=1e-15)
