import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from awe.core import T0, Timestamp
from awe.messages import FreeAck, NodeFree, NodeRead, NodeWrite, ReadResp, WriteAck
from awe.node import DataNode, NodeStore

TS1, TS2 = Timestamp(1, 0), Timestamp(2, 1)


def test_write_then_read():
    node = DataNode(0)
    assert node.handle(NodeWrite(TS1, b"f")) == [WriteAck(TS1)]
    assert node.handle(NodeRead(TS1)) == [ReadResp(TS1, b"f")]


def test_last_write_wins():
    s = NodeStore()
    s.write(TS1, b"a")
    s.write(TS1, b"b")
    assert s.read(TS1) == (TS1, b"b")
    assert len(s) == 1


def test_read_missing_and_freed():
    node = DataNode(0)
    assert node.handle(NodeRead(TS2)) == [ReadResp(TS2, None)]
    node.handle(NodeWrite(TS2, b"x"))
    node.handle(NodeFree(frozenset({TS2})))
    assert node.handle(NodeRead(TS2)) == [ReadResp(TS2, None)]


def test_free_is_selective_and_acks_full_set():
    node = DataNode(0)
    node.handle(NodeWrite(TS1, b"1"))
    node.handle(NodeWrite(TS2, b"2"))
    tss = frozenset({TS1, T0})
    assert node.handle(NodeFree(tss)) == [FreeAck(tss)]
    assert TS2 in node.store and TS1 not in node.store
    assert node.handle(NodeFree(frozenset())) == [FreeAck(frozenset())]
    assert node.store.timestamps() == [TS2]


def test_absent_fragment_rejected():
    with pytest.raises(ValueError):
        NodeStore().write(TS1, None)


def test_unknown_message_rejected():
    with pytest.raises(TypeError):
        DataNode(0).handle(WriteAck(TS1))


ts_strategy = st.builds(Timestamp, st.integers(0, 6), st.integers(-1, 3))


@given(st.dictionaries(ts_strategy, st.binary(min_size=1, max_size=4)), st.sets(ts_strategy))
def test_free_matches_set_difference(initial, freed):
    s = NodeStore()
    for ts, f in initial.items():
        s.write(ts, f)
    s.free(freed)
    assert set(s.timestamps()) == set(initial) - freed
    assert s.stored_bytes == sum(len(f) for ts, f in initial.items() if ts not in freed)


def test_keys_use_canonical_encoding():
    s = NodeStore()
    s.write(TS2, b"z")
    assert list(s.data) == [TS2.encode()]
