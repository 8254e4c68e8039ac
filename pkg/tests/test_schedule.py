import pytest

from broyden_lab.schedule import PhiSchedule, parse_schedule


def test_constant():
    s = PhiSchedule.constant(0.25)
    assert s(0) == s(17) == 0.25
    assert s.constant_value == 0.25


def test_list_runs_out():
    s = PhiSchedule.from_list([0.0, 1.0])
    assert s.values(2) == [0.0, 1.0]
    with pytest.raises(IndexError):
        s(2)


def test_alternating():
    assert PhiSchedule.alternating().values(4) == [0.0, 1.0, 0.0, 1.0]
    assert PhiSchedule.alternating().label == "alternating"


def test_callback_is_validated():
    s = PhiSchedule.from_callback(lambda k: 0.1 * k)
    assert s(10) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="phi"):
        s(11)


@pytest.mark.parametrize("bad", [-0.01, 1.01])
def test_constant_rejects_outside(bad):
    with pytest.raises(ValueError):
        PhiSchedule.constant(bad)


def test_negative_index():
    with pytest.raises(IndexError):
        PhiSchedule.constant(0.0)(-1)


@pytest.mark.parametrize("text, first, second", [
    ("bfgs", 0.0, 0.0), ("DFP", 1.0, 1.0), ("0.5", 0.5, 0.5),
    ("alternating", 0.0, 1.0), ("[0.2, 0.8]", 0.2, 0.8),
])
def test_parse(text, first, second):
    s = parse_schedule(text)
    assert (s(0), s(1)) == (first, second)


@pytest.mark.parametrize("text", ["newton", "1.5", "[]", ""])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        parse_schedule(text)
