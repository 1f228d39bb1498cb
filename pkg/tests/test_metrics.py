import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from slipdetect.metrics import macro_f1, per_class_f1

labels = st.lists(st.integers(0, 1), min_size=1, max_size=60)


def test_perfect():
    y = [0, 1, 1, 0, 1]
    assert macro_f1(y, y) == 1.0


def test_all_static_on_balanced_set():
    y = [0] * 10 + [1] * 10
    assert per_class_f1([0] * 20, y) == (2 / 3, 0.0)
    assert macro_f1([0] * 20, y) == 1 / 3


def test_symmetric_confusion():
    # TP=9, FP=1, FN=1, TN=9 for the slip class
    y = [1] * 10 + [0] * 10
    p = [1] * 9 + [0] + [1] + [0] * 9
    assert per_class_f1(p, y) == (0.9, 0.9)
    assert macro_f1(p, y) == 0.9


def test_errors():
    with pytest.raises(ValueError):
        macro_f1([], [])
    with pytest.raises(ValueError):
        macro_f1([0, 1], [0])


@given(st.data())
def test_matches_counting_oracle(data):
    y = data.draw(labels)
    p = data.draw(st.lists(st.integers(0, 1), min_size=len(y), max_size=len(y)))
    assert macro_f1(p, y) == pytest.approx(oracles.macro_f1_counts(p, y), abs=1e-15)
    assert 0.0 <= macro_f1(p, y) <= 1.0


@given(st.data())
def test_label_swap_symmetry(data):
    y = np.array(data.draw(labels))
    p = np.array(data.draw(st.lists(st.integers(0, 1), min_size=len(y), max_size=len(y))))
    assert macro_f1(p, y) == pytest.approx(macro_f1(1 - p, 1 - y), abs=1e-15)


@given(labels)
def test_self_agreement(y):
    y = np.array(y)
    if len(set(y)) == 2:
        assert macro_f1(y, y) == 1.0
    else:
        # the absent class scores 0, the present one 1
        assert macro_f1(y, y) == 0.5


@given(st.data())
def test_absent_class_bound(data):
    n = data.draw(st.integers(1, 40))
    y = np.zeros(n, int)
    p = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    f_static, f_slip = per_class_f1(p, y)
    assert f_slip == 0.0
    assert macro_f1(p, y) == pytest.approx(f_static / 2, abs=1e-15)
