import pytest
from hypothesis import given
from hypothesis import strategies as st

from bfpmg.wideint import WideInt, WidthError, exact_arith, fits, msb_int, t_range, wrap


@st.composite
def wide(draw, max_width=40):
    w = draw(st.integers(1, max_width))
    lo, hi = t_range(w)
    return WideInt(draw(st.integers(lo, hi)), w)


def test_add_grows_one_bit():
    r = exact_arith(WideInt(3, 3), WideInt(-4, 3), "add")
    assert (r.value, r.width) == (-1, 4)


def test_mul_widths_add():
    r = exact_arith(WideInt(-8, 4), WideInt(7, 4), "mul")
    assert (r.value, r.width) == (-56, 8)


def test_unknown_op():
    with pytest.raises(ValueError):
        exact_arith(WideInt(1, 2), WideInt(1, 2), "div")


@given(wide())
def test_sub_self_is_zero(x):
    assert exact_arith(x, x, "sub").value == 0


@given(wide(), wide(), st.sampled_from(["add", "sub", "mul"]))
def test_results_fit_declared_width(a, b, op):
    r = exact_arith(a, b, op)
    expected = {"add": a.value + b.value, "sub": a.value - b.value, "mul": a.value * b.value}[op]
    assert r.value == expected
    assert fits(r.value, r.width)


@pytest.mark.parametrize("v,s,out", [(-3, 1, -2), (5, 1, 2), (-1, 0, -1), (-1, 7, -1), (-1, 60, -1)])
def test_ashr_floors(v, s, out):
    x = WideInt(v, 8)
    assert x.ashr(s).value == out
    assert x.ashr(s).width == 8


def test_shl_after_incr():
    r = WideInt(2, 3).incr(2).shl(2)
    assert (r.value, r.width) == (8, 5)
    r = WideInt(3, 3).incr(2).shl(2)
    assert (r.value, r.width) == (12, 5)
    r = WideInt(-2, 2).incr(1).shl(1)
    assert (r.value, r.width) == (-4, 3)


def test_shl_overflow_detected():
    with pytest.raises(WidthError):
        WideInt(3, 3).shl(1)


@given(wide())
def test_shl_zero_identity(x):
    assert x.shl(0) == x


@given(wide(), st.integers(0, 10))
def test_incr_decr_round_trip(x, b):
    assert x.incr(b).decr(b) == x


def test_decr_drops_leading_bit():
    r = WideInt(5, 4).decr(1)
    assert (r.value, r.width) == (-3, 3)


def test_incr_sign_extends():
    r = WideInt(-1, 1).incr(3)
    assert (r.value, r.width) == (-1, 4)
    assert r.hex() == "f"


@pytest.mark.parametrize("v,m", [(23, 6), (-8, 4), (-1, 1), (0, 1), (7, 4), (8, 5), (-9, 5)])
def test_msb(v, m):
    assert msb_int(v) == m
    assert WideInt.minimal(v).width == m


@given(st.integers(-(1 << 70), 1 << 70))
def test_msb_is_minimal_width(v):
    m = msb_int(v)
    assert fits(v, m)
    assert m == 1 or not fits(v, m - 1)


@pytest.mark.parametrize("v,out", [(11, 7), (-9, -8), (3, 3)])
def test_clamp(v, out):
    assert WideInt(v, 6).clamp(-8, 7).value == out


def test_out_of_range_rejected():
    with pytest.raises(WidthError):
        WideInt(8, 4)
    with pytest.raises(WidthError):
        WideInt(0, 0)


@given(st.integers(-(1 << 40), 1 << 40), st.integers(1, 20))
def test_wrap_is_congruent_and_in_range(v, w):
    r = wrap(v, w)
    lo, hi = t_range(w)
    assert lo <= r <= hi
    assert (r - v) % (1 << w) == 0


@given(wide())
def test_dump_parse_round_trip(x):
    assert WideInt.parse(x.dump()) == x


def test_parse_rejects_inconsistent_hex():
    with pytest.raises(ValueError):
        WideInt.parse("5 4 6")
