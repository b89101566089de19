import math

import pytest
from hypothesis import given, strategies as st

from gferasure.units import UnitError, angular, format_quantity, linear, ns_grid, parse_quantity


class TestParseQuantity:
    @pytest.mark.parametrize("text,kind,expected", [
        ("5182 MHz", "freq", 5182.0),
        ("5.182 GHz", "freq", 5182.0),
        ("70 kHz", "freq", 0.07),
        ("3.52 us", "time", 3.52),
        ("80 ns", "time", 0.08),
        ("1.4 µs", "time", 1.4),
        ("0.7%", "plain", 0.007),
        (12.5, "freq", 12.5),
    ])
    def test_examples(self, text, kind, expected):
        assert parse_quantity(text, kind) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("bad,kind", [("5 us", "freq"), ("fast", "time"), (True, "plain"), ([1], "time")])
    def test_rejects(self, bad, kind):
        with pytest.raises(UnitError):
            parse_quantity(bad, kind)

    @given(st.floats(min_value=1e-6, max_value=1e6, allow_nan=False))
    def test_format_round_trip(self, x):
        for kind in ("freq", "time"):
            assert parse_quantity(format_quantity(x, kind), kind) == x


def test_angular_linear_inverse():
    assert angular(1.0) == pytest.approx(2 * math.pi)
    assert linear(angular(3.3)) == pytest.approx(3.3)


def test_ns_grid():
    assert ns_grid(3.52) == 3520
    with pytest.raises(ValueError):
        ns_grid(0.0805)
