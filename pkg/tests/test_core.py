import math

import pytest
from hypothesis import given, strategies as st

from twgvt.core import (INFINITY, ContractViolation, Kind, MessageId, Ordering, annihilates,
                        event_cmp, event_key, make_antimessage, new_event)


def ev(src, seq, dst, t, send=0.0):
    return new_event(src, seq, dst, send, t)


def test_key_orders_by_time_first():
    assert event_cmp(ev(0, 0, 0, 1.0), ev(1, 0, 0, 2.0)) is Ordering.LESS


def test_equal_time_breaks_on_destination_then_id():
    a, b = ev(0, 0, 1, 5.0), ev(0, 1, 2, 5.0)
    assert event_cmp(a, b) is Ordering.LESS
    c, d = ev(3, 0, 1, 5.0), ev(0, 7, 1, 5.0)
    assert event_cmp(c, d) is Ordering.GREATER


def test_event_sorts_before_its_anti():
    m = ev(0, 0, 1, 3.0)
    assert event_key(m) < event_key(make_antimessage(m))


def test_identical_keys_are_a_contract_violation():
    m = ev(0, 0, 1, 3.0)
    with pytest.raises(ContractViolation):
        event_cmp(m, m)


def test_recv_before_send_rejected():
    with pytest.raises(ContractViolation):
        new_event(0, 0, 0, 2.0, 1.0)
    with pytest.raises(ContractViolation):
        new_event(0, 0, 0, 0.0, math.inf)


def test_antimessage_mirrors_event():
    m = new_event(2, 5, 3, 1.0, 4.0, b"x")
    a = make_antimessage(m)
    assert a.kind is Kind.ANTI_EVENT and a.id == MessageId(2, 5)
    assert (a.src, a.dst, a.send_time, a.recv_time) == (2, 3, 1.0, 4.0)
    assert annihilates(m, a) and annihilates(a, m)
    assert not annihilates(m, m)
    with pytest.raises(ContractViolation):
        make_antimessage(a)


def test_infinity_is_above_every_time():
    assert INFINITY > 1e300


msgs = st.builds(lambda s, q, d, t: ev(s, q, d, t),
                 st.integers(0, 3), st.integers(0, 50), st.integers(0, 3),
                 st.floats(0, 100, allow_nan=False))


@given(st.lists(msgs, min_size=1, max_size=30, unique_by=lambda m: m.id))
def test_total_order_is_strict_and_consistent(ms):
    keys = [event_key(m) for m in ms]
    assert len(set(keys)) == len(keys)
    ordered = sorted(ms, key=event_key)
    for a, b in zip(ordered, ordered[1:]):
        assert event_cmp(a, b) is Ordering.LESS
        assert event_cmp(b, a) is Ordering.GREATER
        assert a.recv_time <= b.recv_time
