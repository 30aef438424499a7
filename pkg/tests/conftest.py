import sys
from pathlib import Path

from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from sdnids.netmodel import MacAddress, Packet, Proto, ip  # noqa: E402

SERVER = ip("192.168.56.104")

RULE_1 = ('alert icmp 10.0.0.0/8 any -> 192.168.56.104 any (msg:"ryu block"; '
          'detection_filter:track by_src, count 10, seconds 1; sid:1000001;)')
RULE_2 = ('alert icmp !10.0.0.0/8 any -> 192.168.56.104 any (msg:"ryu block"; '
          'detection_filter:track by_src, count 10, seconds 1; sid:1000002;)')
RULE_3 = ('alert icmp 10.0.0.0/8 any -> 192.168.56.104 any (msg:"ryu block"; '
          'dsize:>800; sid:1000003;)')


def echo(src_host=1, src_ip=None, dst=SERVER, payload=56, seq=0, t=0, dst_mac=None,
         proto=Proto.ICMP_ECHO_REQUEST):
    return Packet(MacAddress.host(src_host),
                  dst_mac if dst_mac is not None else MacAddress.parse("b2:2a:30:3a:e7:f2"),
                  ip(src_ip or f"10.0.0.{src_host}"), ip(dst), proto, payload, seq, t)


ipv4s = st.integers(0, 2**32 - 1).map(ip)
macs = st.integers(0, 2**48 - 1).map(MacAddress)


# -- acceptance summary -------------------------------------------------

_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    name = report.nodeid.split("::")[-1]
    _criteria[name] = _criteria.get(name, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _criteria.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
