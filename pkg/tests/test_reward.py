import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from warfarin_bandits.dataset import DoseBucket as B
from warfarin_bandits.errors import ConfigurationError, DomainError
from warfarin_bandits.reward import RewardTable, reshaped_table, reward, standard_table, table_from_cells


def test_standard_table():
    t = standard_table()
    assert reward(t, B.MEDIUM, B.MEDIUM) == 0.0
    assert reward(t, B.LOW, B.HIGH) == -1.0
    assert reward(t, B.LOW, B.LOW) == 0.0
    assert all(np.argmax(t.entries[i]) == i for i in range(3))
    assert t.label == "standard"


def test_reshaped_examples():
    t = reshaped_table(1.5)
    assert reward(t, B.HIGH, B.LOW) == -3.0
    assert reward(t, B.LOW, B.HIGH) == -1.5
    assert reward(t, B.MEDIUM, B.LOW) == -0.75
    assert reward(t, B.HIGH, B.HIGH) == 0.0
    assert t.label == "reshaped"


def test_reshaped_square_reading():
    t = reshaped_table(1.5, near_miss="square")
    assert reward(t, B.MEDIUM, B.LOW) == -2.25


@pytest.mark.parametrize("R", [0.0, -1.0])
def test_reshaped_rejects_nonpositive(R):
    with pytest.raises(DomainError):
        reshaped_table(R)


@given(st.floats(min_value=1e-3, max_value=1e3))
def test_reshaped_severity_ordering(R):
    t = reshaped_table(R)
    others = [t(i, j) for i in range(3) for j in range(3)
              if i != j and (i, j) not in ((B.HIGH, B.LOW), (B.LOW, B.HIGH))]
    assert t(B.HIGH, B.LOW) < t(B.LOW, B.HIGH) < min(others)
    assert max(others) < 0
    assert all(np.argmax(t.entries[i]) == i for i in range(3))


def test_custom_table_lookup_and_invariant():
    cells = {f"{a.name.lower()}_{b.name.lower()}": (0.0 if a == b else -(a + 2 * b + 1)) for a in B for b in B}
    t = table_from_cells(cells)
    assert t(B.HIGH, B.MEDIUM) == -(2 + 2 + 1)
    assert t.label == "custom"
    cells["low_medium"] = 0.5
    with pytest.raises(ConfigurationError):
        table_from_cells(cells)
    del cells["low_medium"]
    with pytest.raises(ConfigurationError, match="missing"):
        table_from_cells(cells)


def test_table_is_immutable():
    t = standard_table()
    with pytest.raises(ValueError):
        t.entries[0, 0] = 5.0
    with pytest.raises(ConfigurationError):
        RewardTable(np.zeros((3, 3)))
