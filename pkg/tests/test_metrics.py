from fractions import Fraction as F

import numpy as np
import pytest

from mac_latency import (AdversaryScript, AdversaryType, ChannelConfig, ConfigError, OutboundMessage,
                         make_adversary, make_algorithm, run_simulation)
from mac_latency.adversary import Scripted
from mac_latency.channel import SILENCE, Heard, RoundRecord, Trace
from mac_latency.experiments import channel_for
from mac_latency.metrics import (compute_latencies, credit_ledger, lemma_check, packet_rows, phase_stats,
                                 queue_occupancy, replay, slope)

from oracles import latencies_by_replay, queue_sizes_by_replay


def scripted(alg, n, text, horizon, atype=AdversaryType(0, 0, 12), J=None, **cfg):
    return run_simulation(ChannelConfig(n, **cfg), make_algorithm(alg, J),
                          Scripted(AdversaryScript.loads(text), atype), horizon)


def random_trace(alg, n=4, seed=0, horizon=600, rho=F(1, 2), lam=F(1, 4), b=2, spec="random"):
    lam = lam if alg not in ("rrw", "of-rrw", "srr", "of-srr") else 0
    atype = AdversaryType(rho, lam, b)
    return run_simulation(channel_for(alg, n, lam), make_algorithm(alg, 2),
                          make_adversary(spec, atype, seed=seed), horizon)


def test_same_round_service_is_latency_zero():
    # analysis works on any well-formed trace, including hand-written ones
    cfg = ChannelConfig(1)
    m = OutboundMessage(0, 0)
    tr = Trace(cfg, make_algorithm("rrw"), AdversaryType(0, 0, 1),
               [RoundRecord(0, (m,), False, Heard(m), ((0, 0),))])
    lat = compute_latencies(tr)
    assert lat.max_latency == 0 and lat.histogram == {0: 1}


def test_one_station_burst_latency():
    for b in (1, 3, 5):
        tr = scripted("rrw", 1, "inject 0 0\n" * b, b + 3, AdversaryType(0, 0, b))
        lat = compute_latencies(tr)
        assert lat.max_latency == b  # sent in rounds 1..b
        assert lat.mean_latency == (b + 1) / 2


def test_empty_trace_summary():
    tr = scripted("rrw", 2, "", 0)
    lat = compute_latencies(tr)
    assert lat.empty and lat.max_latency is None and lat.worst() is None
    assert list(packet_rows(tr)) == []
    assert queue_occupancy(tr).max_total == 0


def test_in_flight_packets_reported_separately():
    tr = scripted("rrw", 2, "inject 0 1\ninject 0 1\ninject 0 1", 3)
    lat = compute_latencies(tr)
    assert len(lat.heard) == 2 and len(lat.in_flight) == 1
    assert lat.in_flight_lower_bound == 3


def test_latencies_match_replay_oracle():
    for alg in ("rrw", "of-srr", "mbtf", "jrrw"):
        tr = random_trace(alg, seed=3)
        got = {p.packet_id: p.latency for p in compute_latencies(tr).heard}
        assert got == latencies_by_replay(tr)


def test_occupancy_conservation():
    for alg in ("of-rrw", "srr", "mbtf", "c-rrw"):
        tr = random_trace(alg, seed=5)
        occ = queue_occupancy(tr)
        assert np.array_equal(occ.per_station, np.array(queue_sizes_by_replay(tr)))
        inj = np.cumsum([0] + [len(r.injections) for r in tr.records])
        heard = np.cumsum([0] + [int(r.feedback.heard and r.feedback.message.payload is not None)
                                 for r in tr.records])
        assert np.array_equal(occ.total, inj - heard)
        assert occ.total[0] == 0


def test_occupancy_monotone_under_pure_injection():
    tr = scripted("rrw", 3, "inject 0 0\ninject 1 1\ninject 2 2", 3, AdversaryType(0, 0, 3))
    # nothing can be sent before the first packet is available
    assert list(queue_occupancy(tr).total) == [0, 1, 2, 3]


def test_phase_decomposition_is_a_partition():
    for alg in ("rrw", "of-jrrw", "ofc-rrw", "of-srr"):
        tr = random_trace(alg, seed=7)
        phases = phase_stats(tr)
        assert phases[0].start == 0
        for a, b in zip(phases, phases[1:]):
            assert b.start == a.end + 1 and a.complete
        assert sum(p.length for p in phases) == tr.horizon
        assert all(p.length >= 1 for p in phases)


def test_phase_stats_rejects_mbtf():
    with pytest.raises(ConfigError):
        phase_stats(random_trace("mbtf"))


def test_phase_recurrence_on_random_runs():
    for alg in ("rrw", "of-rrw", "jrrw", "of-jrrw", "c-rrw", "ofc-rrw", "srr", "of-srr"):
        for seed in range(3):
            tr = random_trace(alg, seed=seed)
            rho, b = tr.adversary_type.rho, tr.adversary_type.b
            phases = phase_stats(tr)
            for cur, nxt in zip(phases, phases[1:]):
                assert nxt.queued_start <= rho * cur.length + b
            assert lemma_check(tr, "phase-recurrence").ok


def test_credit_zero_when_all_queues_small():
    from mac_latency.algorithms import ListState

    n = 6
    for seed in range(3):
        tr = random_trace("mbtf", n=n, seed=seed, rho=F(1, 2), lam=0, b=3)
        credit = credit_ledger(tr).credit
        sizes = queue_sizes_by_replay(tr)
        state = ListState(n)
        seen = 0
        for t, rec in enumerate(tr.records):
            # position i (1-based) holds fewer than n - i + 1 packets
            if all(sizes[t][s] <= n - 1 - i for i, s in enumerate(state.order)):
                assert credit[t] == 0
                seen += 1
            else:
                assert credit[t] > 0
            state.advance(rec.feedback)
        assert seen > 0


def test_credit_of_big_station_equals_its_position():
    # station 2 sits at list position 3 of 4 with exactly n packets
    tr = scripted("mbtf", 4, "inject 0 2\n" * 4, 3)
    assert credit_ledger(tr).credit[1] == 3


def test_credit_bounded_by_occupancy():
    for seed in range(4):
        for spec in ("random", "mbtf-tightness", "greedy-single"):
            tr = random_trace("mbtf", n=5, seed=seed, rho=F(3, 4), lam=F(1, 8), b=2, spec=spec)
            credit = np.array(credit_ledger(tr).credit)
            assert (credit <= queue_occupancy(tr).total).all()


DISCOVERY_SCRIPT = "inject 0 2\n" * 5 + "inject 0 3\n" * 6


def test_credit_identity_on_scripted_discovery():
    # Hand-stepped: station 2 (position 3, 5 packets) is discovered in round 2
    # with C = 4 + 6 = 10. The token needs three forward moves to reach
    # position 4, which happens at round 7 after 4 delay rounds (3..6); then
    # C = 6. Station 3 is discovered in round 7 with C = 6; the 6 rounds
    # 8..13 drain it and C drops to 0.
    tr = scripted("mbtf", 4, DISCOVERY_SCRIPT, 30)
    ledger = credit_ledger(tr)
    w1, w2 = ledger.windows
    assert (w1.start, w1.position, w1.end, w1.delay) == (2, 3, 7, 4)
    assert (ledger.credit[2], ledger.credit[7]) == (10, 6)
    assert (w2.start, w2.position, w2.end, w2.delay) == (7, 4, 14, 6)
    assert ledger.credit[14] == 0
    assert ledger.delay_rounds == set(range(3, 7)) | set(range(8, 14))
    res = lemma_check(tr, "credit")
    assert res.ok and res.checked == 2


def test_credit_identity_on_jammed_discovery():
    # with jamming the control variant runs; jammed rounds are not delay rounds
    atype = AdversaryType(0, F(1, 2), 12)
    text = "inject 0 1\n" * 4 + "inject 0 3\n" * 5 + "jam 3\njam 7\n"
    tr = scripted("mbtf", 4, text, 40, atype, jamming_enabled=True)
    res = lemma_check(tr, "credit")
    assert res.ok and res.checked >= 2
    for w in credit_ledger(tr).windows:
        assert w.credit_start - w.credit_end == w.delay


def test_credit_windows_with_injections_are_not_checked():
    tr = scripted("mbtf", 4, "inject 0 2\n" * 5 + "inject 4 0\n", 30)
    w = credit_ledger(tr).windows[0]
    assert not w.checkable and "injection" in w.reason


def test_lemma_checks_pass_trivially_on_empty_traces():
    for alg, lid in (("of-jrrw", "jrrw-drain"), ("ofc-rrw", "crrw-drain"), ("srr", "search-progress"),
                     ("rrw", "two-phase"), ("rrw", "phase-recurrence"), ("mbtf", "credit")):
        cfg = {"jamming_enabled": alg in ("of-jrrw", "ofc-rrw"), "collision_detection": alg == "srr"}
        assert lemma_check(scripted(alg, 3, "", 0, J=1, **cfg), lid).ok


def test_lemma_check_errors():
    tr = random_trace("rrw")
    with pytest.raises(ConfigError):
        lemma_check(tr, "no-such-lemma")
    with pytest.raises(ConfigError):
        lemma_check(tr, "credit")


def test_drain_check_on_greedy_runs():
    for spec in ("greedy-single", "greedy-round-robin", "greedy-behind-token"):
        tr = random_trace("of-jrrw", n=4, spec=spec, horizon=1500)
        res = lemma_check(tr, "jrrw-drain")
        assert res.ok and res.checked > 0
        tr = random_trace("ofc-rrw", n=4, spec=spec, horizon=1500)
        assert lemma_check(tr, "crrw-drain").ok


def _delete_first_heard(trace):
    recs = list(trace.records)
    i = next(k for k, r in enumerate(recs) if r.feedback.heard and r.feedback.message.payload is not None)
    recs[i] = recs[i]._replace(transmitters=(), feedback=SILENCE)
    return Trace(trace.config, trace.algorithm, trace.adversary_type, recs, trace.adversary_name)


def test_corrupted_trace_fails_drain_check():
    tr = scripted("of-jrrw", 3, "inject 0 1\ninject 0 2", 60, J=1, jamming_enabled=True)
    assert lemma_check(tr, "jrrw-drain").ok
    bad = lemma_check(_delete_first_heard(tr), "jrrw-drain")
    assert not bad.ok and bad.round is not None


def test_corrupted_trace_fails_two_phase_check():
    tr = random_trace("of-rrw", n=3, spec="greedy-single", horizon=300, lam=0)
    assert lemma_check(tr, "two-phase").ok
    assert not lemma_check(_delete_first_heard(tr), "two-phase").ok


def test_analysis_is_idempotent():
    tr = random_trace("mbtf", seed=2)
    a = (compute_latencies(tr).max_latency, queue_occupancy(tr).max_total, credit_ledger(tr).credit)
    tr._replay_cache = None
    b = (compute_latencies(tr).max_latency, queue_occupancy(tr).max_total, credit_ledger(tr).credit)
    assert a == b
    assert replay(tr) is replay(tr)


def test_slope():
    assert slope([1, 2, 4, 8], [3, 12, 48, 192]) == pytest.approx(2.0)
