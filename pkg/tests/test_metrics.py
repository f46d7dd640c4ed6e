import math

import numpy as np
import pytest

from kernel_eiv.metrics import fit, median


def test_fit_examples():
    ref = np.array([1.0, -2.0, 0.5, 3.0])
    assert fit(ref, ref) == 1.0
    assert fit(np.full(4, ref.mean()), ref) == pytest.approx(0.0, abs=1e-15)
    assert fit([1.0, 2.0], [0.0, 2.0]) == pytest.approx(1 - 1 / math.sqrt(2))


def test_fit_is_not_symmetric():
    a, b = np.array([1.0, 2.0]), np.array([0.0, 2.0])
    assert fit(a, b) != fit(b, a)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(ValueError):
        fit([1.0], [1.0, 2.0])


def test_fit_can_be_negative():
    assert fit([10.0, -10.0], [0.0, 1.0]) < 0


def test_median_examples():
    assert median([3, 1, 2]) == 2
    assert median([1, 2, 3, 4]) == 2.5
    with pytest.raises(ValueError):
        median([])


def test_median_sort_oracle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        xs = list(rng.standard_normal(int(rng.integers(1, 30))))
        s = sorted(xs)
        k = len(s)
        expected = s[k // 2] if k % 2 else 0.5 * (s[k // 2 - 1] + s[k // 2])
        assert median(xs) == pytest.approx(expected, abs=1e-15)


def test_aggregation_order_independent():
    rng = np.random.default_rng(9)
    pairs = [(rng.standard_normal(5), rng.standard_normal(5)) for _ in range(11)]
    fits = [fit(a, r) for a, r in pairs]
    perm = rng.permutation(len(pairs))
    assert median([fit(*pairs[i]) for i in perm]) == median(fits)
