import pytest

from awe.core import Timestamp
from awe.faults import STRATEGIES, AdversarySpec, ByzantineNode, make_node, mix64
from awe.messages import FreeAck, NodeFree, NodeRead, NodeWrite, ReadResp, WriteAck
from awe.node import DataNode

TS1, TS2 = Timestamp(1, 0), Timestamp(2, 0)


def test_mix64_is_deterministic_and_spreads():
    assert mix64(1, 2, 3) == mix64(1, 2, 3)
    assert len({mix64(0, 0, i) for i in range(1000)}) == 1000


def test_silent_never_answers():
    node = ByzantineNode(0, "silent")
    for msg in (NodeWrite(TS1, b"a"), NodeRead(TS1), NodeFree(frozenset({TS1}))):
        assert node.handle(msg) == []


def test_corrupt_fragment_flips_bytes():
    node = ByzantineNode(0, "corrupt-fragment")
    assert node.handle(NodeWrite(TS1, b"\x01\x02")) == [WriteAck(TS1)]
    [resp] = node.handle(NodeRead(TS1))
    assert resp.ts == TS1 and resp.frag != b"\x01\x02" and len(resp.frag) == 2


def test_wrong_timestamp_never_echoes_request():
    node = ByzantineNode(0, "wrong-timestamp", seed=3)
    for _ in range(20):
        [ack] = node.handle(NodeWrite(TS1, b"a"))
        assert ack.ts != TS1 and ack.ts.c == TS1.c
        [resp] = node.handle(NodeRead(TS1))
        assert resp.ts != TS1


def test_ack_without_store_keeps_nothing():
    node = ByzantineNode(0, "ack-without-store")
    assert node.handle(NodeWrite(TS1, b"a")) == [WriteAck(TS1)]
    assert node.handle(NodeRead(TS1)) == [ReadResp(TS1, None)]
    assert len(node.store) == 0


def test_spurious_free_eventually_drops_data():
    node = ByzantineNode(0, "spurious-free", seed=11)
    dropped = False
    for sn in range(1, 30):
        node.handle(NodeWrite(Timestamp(sn, 0), b"a"))
        if len(node.store) < sn:
            dropped = True
            break
    assert dropped


def test_stale_replay_serves_older_fragments():
    node = ByzantineNode(0, "stale-replay", seed=2)
    node.handle(NodeWrite(TS1, b"old"))
    node.handle(NodeWrite(TS2, b"new"))
    assert node.handle(NodeFree(frozenset({TS1}))) == [FreeAck(frozenset({TS1}))]
    for _ in range(10):
        [resp] = node.handle(NodeRead(TS2))
        assert resp.frag == b"old"
    assert node.handle(NodeRead(TS1)) == [ReadResp(TS1, None)]


def test_behaviour_is_reproducible():
    def replay(seed):
        node = ByzantineNode(1, "wrong-timestamp", seed)
        return [node.handle(NodeWrite(Timestamp(i, 0), b"x")) for i in range(1, 20)]

    assert replay(7) == replay(7)
    assert replay(7) != replay(8)


def test_unknown_strategy_rejected():
    with pytest.raises(ValueError):
        ByzantineNode(0, "helpful")


def test_make_node_wraps_only_listed_nodes():
    adv = AdversarySpec({1: "silent"}, seed=4)
    assert type(make_node(0, adv)) is DataNode and make_node(0, adv).honest
    assert isinstance(make_node(1, adv), ByzantineNode) and not make_node(1, adv).honest


def test_adversary_validation_messages():
    adv = AdversarySpec({0: "silent", 5: "bogus"}, {3: -1})
    errs = adv.field_errors(n=4, t=1, m=2)
    assert any("exceed t=1" in e for e in errs)
    assert any("node id 5" in e for e in errs)
    assert any("'bogus'" in e for e in errs)
    assert any("client id 3" in e for e in errs)
    assert any("must be >= 0" in e for e in errs)
    assert all(AdversarySpec({0: s}).field_errors(4, 1, 1) == [] for s in STRATEGIES)
