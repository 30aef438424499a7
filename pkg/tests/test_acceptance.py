"""End-to-end acceptance checks, one test per criterion.

Each test prints as a PASS/FAIL line in the terminal summary (see conftest).
Tolerances are pinned below.
"""

import hashlib
import json
import math
import random
import re
import time
from collections import Counter
from statistics import fmean, pstdev

import numpy as np
import pytest

from conftest import RULE_1, RULE_2, RULE_3
from oracles import best_rule, flood_mitigation_us, trailing_window_fires
from sdnids.dataplane import Switch
from sdnids.ids import DetectionEngine, EventFilter, RuleSyntaxError, parse_rule, parse_ruleset
from sdnids.netmodel import (
    Drop,
    FlowRule,
    MacAddress,
    Match,
    Output,
    Packet,
    Proto,
    ProtoClass,
    ip,
    packet_matches,
)
from sdnids.simkit import parse_dump, preset, run

US = 1_000_000
BASELINE_WALL_S = 5.0
MITIGATION_REL_TOL = 0.10
RTT_REL_TOL = 0.05
RTT_RECOVERY_US = 2 * US
CV_MAX = 0.01
III_MIN_FIRINGS_FIRST_S = 42_000
N_DETECTION_TRACES = 1_000
MAX_TRACE_LEN = 10_000
MAX_SOURCES = 8
N_TABLES = 200
MAX_TABLE_RULES = 32
PACKETS_PER_TABLE = 1_000
N_MUTANTS = 20
SEED = 42

FORWARD_LINE = re.compile(r"priority=1,in_port=[1-4],dl_dst=([0-9a-f]{2}:){5}[0-9a-f]{2} "
                          r"actions=output:[1-4]$")
BLOCK_MATCH = re.compile(r"icmp,dl_src=(?P<mac>[0-9a-f:]{17}),nw_src=(?P<src>[\d.]+),"
                         r"nw_dst=(?P<dst>[\d.]+)$")


# -- scenario runs -------------------------------------------------------------

@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    cache = {}

    def get(name, tag=""):
        key = name + tag
        if key not in cache:
            out = tmp_path_factory.mktemp(f"run_{key}")
            t0 = time.perf_counter()
            res = run(preset(name, seed=SEED), out_dir=out, keep_world=True)
            res.wall_s = time.perf_counter() - t0
            res.audit = audit_log(out / "events.jsonl", res.world.cfg.latencies)
            res.world = None  # keep memory flat across the module
            cache[key] = res
        return cache[key]

    return get


def audit_log(path, lat):
    """Single pass over the event log for the simkit invariants."""
    switched, mirrored = Counter(), Counter()
    blocks = {}
    leaks = []
    fire_times = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            e = json.loads(line)
            ev = e["ev"]
            if ev == "sw_rx":
                switched[(e["smac"], e["src"], e["dst"], e["seq"], e["len"])] += 1
                triple = (e["smac"], e["src"], e["dst"])
                if triple in blocks and e["proto"].startswith("icmp") \
                        and not e["out"].startswith("drop"):
                    leaks.append(("switch", e))
            elif ev == "ids_rx":
                mirrored[(e["smac"], e["src"], e["dst"], e["seq"], e["len"])] += 1
                if "fire" in e:
                    fire_times.append(e["t"])
            elif ev == "nat_rx":
                t_block = blocks.get((e["smac"], e["src"], e["dst"]))
                if t_block is not None and e["t"] > t_block + lat.switch_nat:
                    leaks.append(("nat", e))
            elif ev == "sw_flow_mod" and e["prio"] == 100:
                m = BLOCK_MATCH.match(e["match"])
                blocks[(m["mac"], m["src"], m["dst"])] = e["t"]
    return {"mirror_exact": switched == mirrored, "switched": sum(switched.values()),
            "leaks": leaks, "blocks": blocks, "fire_times": fire_times}


def forwarding_and_block_rules(dump):
    rows = parse_dump(dump)
    return [r for r in rows if r["priority"] == 1], [r for r in rows if r["priority"] == 100]


def dump_core(dump):
    """Dump lines without the volatile counters: ``priority=..,match actions=..``."""
    return ["priority=" + line.split("priority=", 1)[1] for line in dump.splitlines()[1:]]


def assert_block_rule(row, mac, src):
    assert row["actions"] == "drop"
    assert row["match"] == {"icmp": True, "dl_src": mac, "nw_src": src,
                            "nw_dst": "192.168.56.104"}


def within(measured, expected, tol):
    return abs(measured - expected) <= tol * expected


def cv(values):
    return pstdev(values) / fmean(values)


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_baseline(runs):
    r = runs("baseline")
    rep = r.report
    assert rep.alerts_passed == 0
    assert not forwarding_and_block_rules(r.dumps["end"])[1]
    for h in ("h1", "h2", "h3"):
        assert rep.hosts[h].sent > 0 and rep.hosts[h].loss_pct == 0.0
    core = dump_core(r.dumps["postpingall"])
    assert len(core) == 13
    assert all(FORWARD_LINE.match(line) for line in core[:12])
    assert core[12] == "priority=0 actions=CONTROLLER:65535"
    assert "priority=1,in_port=2,dl_dst=b2:2a:30:3a:e7:f2 actions=output:1" in core
    assert r.wall_s < BASELINE_WALL_S


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_scenario_one(runs):
    base_rtt_us = runs("baseline").report.hosts["h2"].avg_rtt_ms * 1000
    r = runs("I")
    rep, lat = r.report, preset("I").latencies
    _, blocks = forwarding_and_block_rules(r.dumps["end"])
    assert len(blocks) == 2
    by_mac = {b["match"]["dl_src"]: b for b in blocks}
    assert_block_rule(by_mac["00:00:00:00:00:01"], "00:00:00:00:00:01", "10.0.0.1")
    assert_block_rule(by_mac["00:00:00:00:00:03"], "00:00:00:00:00:03", "10.0.0.3")

    exact = flood_mitigation_us(lat, 21_000, 10)
    approx = 11 * US / 21_000 + lat.host_switch + lat.alert_path()
    for name in ("h1", "h3"):
        m_us = rep.attackers[name].mitigation_s * US
        assert within(m_us, exact, MITIGATION_REL_TOL), (name, m_us, exact)
        assert within(m_us, approx, MITIGATION_REL_TOL), (name, m_us, approx)

    h2 = rep.hosts["h2"]
    assert h2.loss_pct == 0.0 and h2.sent == h2.received
    settled = max(a.block_at_us for a in rep.attackers.values()) + RTT_RECOVERY_US
    after = [rtt for sent_at, rtt in h2.rtt_samples if sent_at >= settled]
    assert after and all(within(rtt, base_rtt_us, RTT_REL_TOL) for rtt in after)


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_scenario_two(runs):
    r = runs("II")
    rep, cfg = r.report, preset("II")
    (block,) = forwarding_and_block_rules(r.dumps["end"])[1]
    assert_block_rule(block, "00:00:00:00:00:01", "10.0.0.55")
    # pingall at t=0 is set-up traffic; the rate series starts with the pings
    bins = range(int(cfg.ping_start_s), int(cfg.duration_s))
    for src in ("10.0.0.2", "10.0.0.3"):
        series = rep.series(src)
        values = [series.get(b, 0) for b in bins]
        assert min(values) > 0 and cv(values) < CV_MAX, (src, values)
    for h in ("h2", "h3"):
        assert rep.hosts[h].loss_pct == 0.0


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_scenario_three(runs):
    r = runs("III")
    rep, lat = r.report, preset("III").latencies
    fire_times = r.audit["fire_times"]
    first_attack = rep.attackers["h1"].first_packet_at_us
    # first oversized frame reaches the IDS one host link plus one mirror hop later
    assert fire_times[0] == first_attack + lat.host_switch + lat.mirror
    m_us = rep.attackers["h1"].mitigation_s * US
    assert within(m_us, flood_mitigation_us(lat, 42_000, None), MITIGATION_REL_TOL)
    assert within(m_us, lat.host_switch + lat.alert_path(), MITIGATION_REL_TOL)
    t0 = fire_times[0]
    first_second = sum(1 for t in fire_times if t0 <= t < t0 + US)
    assert first_second >= III_MIN_FIRINGS_FIRST_S
    assert rep.alerts_passed == 1
    for h in ("h2", "h3"):
        assert rep.hosts[h].loss_pct == 0.0


# -- 5 -------------------------------------------------------------------------

def random_trace(rng):
    n = int(math.exp(rng.uniform(0, math.log(MAX_TRACE_LEN))))
    k = rng.randint(1, MAX_SOURCES)
    span = rng.choice([200_000, US, 3 * US, 10 * US])
    if rng.random() < 0.3:
        # coarse grid: many ties and packets exactly one window apart
        grid = rng.choice([1_000, 50_000, 100_000, 250_000])
        times = sorted(rng.randrange(0, span // grid + 1) * grid for _ in range(n))
    else:
        times = sorted(rng.randrange(0, span) for _ in range(n))
    sources = [rng.randrange(k) for _ in range(n)]
    return times, sources


def test_criterion_5_detection_oracle():
    rng = random.Random(SEED)
    rule = parse_rule(RULE_1)
    macs = [MacAddress.host(s + 1) for s in range(MAX_SOURCES)]
    ips = [ip(f"10.0.{s}.{s + 1}") for s in range(MAX_SOURCES)]
    server = ip("192.168.56.104")
    for _ in range(N_DETECTION_TRACES):
        times, sources = random_trace(rng)
        engine = DetectionEngine([rule], EventFilter())
        got = np.fromiter(
            (bool(engine.observe(Packet(macs[s], macs[0], ips[s], server,
                                        Proto.ICMP_ECHO_REQUEST), t)[1])
             for t, s in zip(times, sources)), dtype=bool, count=len(times))
        want = trailing_window_fires(times, sources, 10, 1)
        assert np.array_equal(got, want)

    def fires(times):
        e = DetectionEngine([rule])
        p = Packet(macs[0], macs[0], ips[0], server, Proto.ICMP_ECHO_REQUEST)
        return [bool(e.evaluate(p, t)) for t in times]

    assert not any(fires([i * 99_000 for i in range(10)]))
    assert fires([i * 99_000 for i in range(11)])[-1]
    assert not any(fires([i * 100_000 for i in range(11)]))  # first one ages out at 1 s


# -- 6 -------------------------------------------------------------------------

def random_match(rng, macs, ips):
    def maybe(values):
        return rng.choice(values) if rng.random() < 0.4 else None

    return Match(in_port=maybe([1, 2, 3, 4]), dl_src=maybe(macs), dl_dst=maybe(macs),
                 proto=maybe(list(ProtoClass)), nw_src=maybe(ips), nw_dst=maybe(ips))


def test_criterion_6_matching_oracle():
    rng = random.Random(SEED)
    macs = [MacAddress.host(i) for i in range(1, 4)]
    ips = [ip(a) for a in ("10.0.0.1", "10.0.0.2", "10.0.0.55", "192.168.56.104")]
    protos = [Proto.ICMP_ECHO_REQUEST, Proto.ICMP_ECHO_REPLY, Proto.UDP]
    for _ in range(N_TABLES):
        sw = Switch("s1", {1: "nat", 2: "h1", 3: "h2", 4: "h3"}, 5)
        entries = [(0, 0, -1, sw.flow_table.rules[-1])]
        t = 0
        for i in range(rng.randint(0, MAX_TABLE_RULES)):
            t += rng.choice([0, 0, 1, 5])
            rule = FlowRule(rng.randint(0, 5), random_match(rng, macs, ips),
                            rng.choice([Output(1), Output(3), Drop()]))
            if sw.flow_table.add(rule, now=t) is rule:
                entries.append((rule.priority, t, i, rule))
        for _ in range(PACKETS_PER_TABLE):
            p = Packet(rng.choice(macs), rng.choice(macs), rng.choice(ips), rng.choice(ips),
                       rng.choice(protos))
            port = rng.randint(1, 4)
            want = best_rule(entries, lambda r: packet_matches(p, r.match, port))
            assert sw.flow_table.lookup(p, port) is want


# -- 7 -------------------------------------------------------------------------

def test_criterion_7_mirror_and_silence(runs):
    for name in ("baseline", "I", "II", "III"):
        r = runs(name)
        a = r.audit
        assert a["switched"] > 0
        assert a["mirror_exact"], name
        assert a["leaks"] == [], (name, a["leaks"][:3])
        assert len(a["blocks"]) == len(preset(name).attackers), name
        # server-side drops only while an attacker is still unblocked
        first = min((x.first_packet_at_us for x in r.report.attackers.values()), default=None)
        last = max((x.block_at_us for x in r.report.attackers.values()), default=None)
        for t in r.report.server_drop_times_us:
            assert first <= t <= last + preset(name).latencies.switch_nat \
                + preset(name).latencies.nat_server, (name, t)


# -- 8 -------------------------------------------------------------------------

def test_criterion_8_determinism(runs):
    a, b = runs("I"), runs("I", tag="_again")
    assert a.event_digest == b.event_digest
    files = [hashlib.sha256((x.out_dir / "events.jsonl").read_bytes()).hexdigest()
             for x in (a, b)]
    assert files[0] == files[1] == a.event_digest


# -- 9 -------------------------------------------------------------------------

MUTANTS = [
    RULE_1.replace("sid:1000001;", "sid:1000001; flowbits:set,x;"),   # unknown option
    RULE_1.replace("sid:1000001;", "sid:1000001; sid:2;"),            # repeated option
    RULE_1.replace(" sid:1000001;", ""),                              # no sid
    RULE_1.replace('msg:"ryu block"; ', ""),                          # no msg
    RULE_1.replace("icmp", "tcp", 1),                                 # protocol
    RULE_1.replace("alert", "drop", 1),                               # action
    RULE_1.replace("->", "<-"),                                       # direction
    RULE_1.replace("10.0.0.0/8", "10.0.0.0/33"),                      # prefix length
    RULE_1.replace("192.168.56.104", "192.168.56.300"),               # octet
    RULE_1.replace("any ->", "80 ->"),                                # port
    RULE_1.rstrip(")"),                                               # no closing paren
    RULE_1 + " extra",                                                # trailing text
    RULE_1.replace('"ryu block"', '"ryu block'),                      # open quote
    RULE_3.replace("dsize:>800", "dsize:<800"),                       # dsize operator
    RULE_3.replace("dsize:>800", "dsize:>big"),                       # dsize value
    RULE_1.replace("by_src", "by_dst"),                               # track
    RULE_1.replace("count 10", "count 0"),                            # zero count
    RULE_1.replace(", seconds 1", ""),                                # no seconds
    RULE_2.replace("sid:1000002", "sid:abc"),                         # sid value
    RULE_3.replace(" dsize:>800;", ""),                               # no predicate
    RULE_1.replace('"ryu block"', "ryu block"),                       # unquoted msg
    RULE_1.replace("10.0.0.0/8", "!any"),                             # negated any
    "alert icmp any any",                                             # truncated header
]


def test_criterion_9_rule_parser():
    assert parse_rule(RULE_1).dst.network.prefixlen == 32
    normal = [parse_rule(r) for r in (RULE_1, RULE_2, RULE_3)]
    assert [(str(r.src), str(r.dst.network), r.rate_filter and
             (r.rate_filter.count, r.rate_filter.seconds), r.dsize_gt, r.msg, r.sid)
            for r in normal] == [
        ("10.0.0.0/8", "192.168.56.104/32", (10, 1), None, "ryu block", 1000001),
        ("!10.0.0.0/8", "192.168.56.104/32", (10, 1), None, "ryu block", 1000002),
        ("10.0.0.0/8", "192.168.56.104/32", None, 800, "ryu block", 1000003)]
    for r in normal:
        assert parse_rule(r.format()) == r

    assert len(MUTANTS) >= N_MUTANTS
    for n, bad in enumerate(MUTANTS):
        lines = [RULE_2, "", "# comment", bad, RULE_3.replace("1000003", "1000009")]
        with pytest.raises(RuleSyntaxError) as ei:
            parse_ruleset("\n".join(lines))
        assert ei.value.line == 4, (n, bad, ei.value)
        assert 1 <= ei.value.column <= len(bad) + 1, (n, ei.value)
    dup = "\n".join([RULE_1, RULE_1])
    with pytest.raises(RuleSyntaxError) as ei:
        parse_ruleset(dup)
    assert ei.value.line == 2
