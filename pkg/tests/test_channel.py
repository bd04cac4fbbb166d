from fractions import Fraction as F

import pytest

from mac_latency import (AdversaryScript, AdversaryType, ChannelConfig, ConfigError, InvalidInput,
                         OutboundMessage, make_adversary, make_algorithm, resolve_round, run_simulation)
from mac_latency.adversary import Scripted
from mac_latency.channel import COLLISION, SILENCE, Kind


def test_resolve_round_feedback():
    plain = ChannelConfig(3)
    cd = ChannelConfig(3, collision_detection=True)
    jam = ChannelConfig(3, jamming_enabled=True)
    jam_cd = ChannelConfig(3, jamming_enabled=True, collision_detection=True)
    m0, m1 = OutboundMessage(0, 5), OutboundMessage(1, 6)
    fb = resolve_round([m0], False, plain)
    assert fb.heard and fb.message == m0
    assert resolve_round([], False, plain) == SILENCE
    assert resolve_round([m0, m1], False, plain) == SILENCE
    assert resolve_round([m0, m1], False, cd) == COLLISION
    assert resolve_round([], False, cd) == SILENCE
    assert resolve_round([m0], True, jam) == SILENCE
    assert resolve_round([m0], True, jam_cd) == COLLISION
    assert resolve_round([], True, jam_cd) == COLLISION


def test_resolve_round_rejects_bad_input():
    cfg = ChannelConfig(2)
    with pytest.raises(InvalidInput):
        resolve_round([OutboundMessage(0, 1), OutboundMessage(0, 2)], False, cfg)
    with pytest.raises(InvalidInput):
        resolve_round([OutboundMessage(2, 1)], False, cfg)
    with pytest.raises(InvalidInput):
        resolve_round([OutboundMessage(0, 1, control_only=True)], False, cfg)
    with pytest.raises(InvalidInput):
        resolve_round([], True, cfg)


def test_channel_config_validation():
    with pytest.raises(ConfigError):
        ChannelConfig(0)
    with pytest.raises(ConfigError):
        ChannelConfig(True)


def test_packet_injected_in_round_t_is_sent_no_earlier_than_t_plus_1():
    atype = AdversaryType(F(1, 2), 0, 2)
    tr = run_simulation(ChannelConfig(3), make_algorithm("rrw"),
                        make_adversary("greedy-round-robin", atype), 200)
    injected = {pid: r.round for r in tr.records for _, pid in r.injections}
    for r in tr.records:
        for m in r.transmitters:
            if m.payload is not None:
                assert injected[m.payload] < r.round


def test_heard_packet_is_dequeued_once():
    atype = AdversaryType(F(1, 2), F(1, 4), 2)
    tr = run_simulation(ChannelConfig(4, jamming_enabled=True), make_algorithm("c-rrw"),
                        make_adversary("random", atype, seed=2), 500)
    heard = [r.feedback.message.payload for r in tr.records
             if r.feedback.kind is Kind.HEARD and r.feedback.message.payload is not None]
    assert len(heard) == len(set(heard))


def test_algorithm_channel_compatibility():
    atype = AdversaryType(0, 0, 1)
    adv = Scripted(AdversaryScript(), atype)
    with pytest.raises(ConfigError):
        run_simulation(ChannelConfig(2, jamming_enabled=True), make_algorithm("rrw"), adv, 1)
    with pytest.raises(ConfigError):
        run_simulation(ChannelConfig(2), make_algorithm("srr"), adv, 1)
    with pytest.raises(ConfigError):
        make_algorithm("jrrw")
    with pytest.raises(ConfigError):
        make_algorithm("nope")


def test_horizon_and_trace_serialisation(tmp_path):
    atype = AdversaryType(0, 0, 1)
    adv = Scripted(AdversaryScript.loads("inject 0 1"), atype)
    tr = run_simulation(ChannelConfig(2), make_algorithm("rrw"), adv, 10)
    assert tr.horizon == 10 and len(tr.lines()) == 10
    p = tmp_path / "t.txt"
    tr.write(p)
    assert p.read_text() == tr.canonical()
    assert len(tr.digest()) == 64
    empty = run_simulation(ChannelConfig(2), make_algorithm("rrw"), Scripted(AdversaryScript(), atype), 0)
    assert empty.canonical() == ""
    with pytest.raises(ConfigError):
        run_simulation(ChannelConfig(2), make_algorithm("rrw"), Scripted(AdversaryScript(), atype), -1)


@pytest.mark.parametrize("alg,jam,cd", [("rrw", False, False), ("of-srr", False, True),
                                        ("mbtf", True, False), ("of-jrrw", True, False),
                                        ("ofc-rrw", True, False)])
def test_fast_and_replicated_modes_agree(alg, jam, cd):
    lam = F(1, 4) if jam else 0
    atype = AdversaryType(F(1, 2), lam, 2)
    cfg = ChannelConfig(4, jamming_enabled=jam, collision_detection=cd)
    for seed in range(5):
        a = run_simulation(cfg, make_algorithm(alg, 2), make_adversary("random", atype, seed=seed), 300)
        b = run_simulation(cfg, make_algorithm(alg, 2), make_adversary("random", atype, seed=seed), 300,
                           replicated=True)
        assert a.canonical() == b.canonical()
