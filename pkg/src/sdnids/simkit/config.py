"""Scenario configuration, built-in presets and the key/value config file."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from ..ids import DEFAULT_RULES
from ..netmodel import ip

HOSTS = ("h1", "h2", "h3")
SCENARIOS = ("baseline", "I", "II", "III")
US_PER_S = 1_000_000


class ConfigError(ValueError):
    pass


def seconds_to_us(s: float) -> int:
    return round(s * US_PER_S)


@dataclass(frozen=True)
class Latencies:
    """One-way delays in microseconds."""

    host_switch: int = 20
    switch_nat: int = 20
    nat_server: int = 100
    mirror: int = 50
    alert_channel: int = 100
    controller: int = 200
    control_link: int = 100
    switch_forward: int = 0

    def alert_path(self) -> int:
        """Mirror tap to drop rule installed, excluding detection delay."""
        return self.mirror + self.alert_channel + self.controller + self.control_link


@dataclass(frozen=True)
class AttackerConfig:
    start_s: float
    stop_s: float
    rate_pps: int
    payload_bytes: int = 0
    spoofed_src: Optional[str] = None


def _rules(*sids: int) -> str:
    keep = [line for line in DEFAULT_RULES.splitlines()
            if any(f"sid:{sid};" in line for sid in sids)]
    return "\n".join(keep) + "\n"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "baseline"
    duration_s: float = 20.0
    benign_hosts: Tuple[str, ...] = HOSTS
    attackers: Dict[str, AttackerConfig] = field(default_factory=dict)
    ping_interval_s: float = 1.0
    ping_start_s: float = 1.0
    ping_payload_bytes: int = 56
    pingall: bool = True
    pingall_spacing_us: int = 10_000
    server_capacity_pps: int = 10_000
    server_queue_limit: int = 1_000
    latencies: Latencies = Latencies()
    defense: bool = True
    ruleset_path: Optional[str] = None
    ruleset_text: str = DEFAULT_RULES
    event_filter_count: int = 1
    event_filter_seconds: int = 60
    seed: int = 42

    def validate(self) -> "ScenarioConfig":
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if self.ping_interval_s <= 0:
            raise ConfigError("ping_interval_s must be positive")
        if self.server_capacity_pps <= 0 or self.server_queue_limit <= 0:
            raise ConfigError("server capacity and queue limit must be positive")
        for h in self.benign_hosts:
            if h not in HOSTS:
                raise ConfigError(f"unknown benign host {h!r}")
        for h, a in self.attackers.items():
            if h not in HOSTS:
                raise ConfigError(f"unknown attacker host {h!r}")
            if h in self.benign_hosts:
                raise ConfigError(f"{h} cannot be both benign and an attacker")
            if a.rate_pps <= 0:
                raise ConfigError(f"{h}: rate_pps must be positive")
            if a.payload_bytes < 0:
                raise ConfigError(f"{h}: payload_bytes must be non-negative")
            if not 0 <= a.start_s < self.duration_s:
                raise ConfigError(f"{h}: attack must start inside the run")
            if a.stop_s <= a.start_s:
                raise ConfigError(f"{h}: stop_s must be after start_s")
            if a.spoofed_src is not None:
                try:
                    ip(a.spoofed_src)
                except ValueError as exc:
                    raise ConfigError(f"{h}: {exc}") from None
        for name, value in dataclasses.asdict(self.latencies).items():
            if value < 0:
                raise ConfigError(f"latency {name} must be non-negative")
        return self

    def load_rules(self) -> str:
        if self.ruleset_path is not None:
            try:
                return Path(self.ruleset_path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read ruleset: {exc}") from None
        return self.ruleset_text


PRESETS: Dict[str, ScenarioConfig] = {
    "baseline": ScenarioConfig(),
    # two flooding hosts; host 3 first, then host 1
    "I": ScenarioConfig(
        scenario="I", duration_s=75.0, benign_hosts=("h2",),
        attackers={"h3": AttackerConfig(60.0, 64.0, 21_000),
                   "h1": AttackerConfig(61.0, 64.0, 21_000)},
        ruleset_text=_rules(1000001)),
    "II": ScenarioConfig(
        scenario="II", duration_s=15.0, benign_hosts=("h2", "h3"),
        attackers={"h1": AttackerConfig(2.0, 4.0, 42_000, spoofed_src="10.0.0.55")},
        ruleset_text=_rules(1000001, 1000002)),
    "III": ScenarioConfig(
        scenario="III", duration_s=25.0, benign_hosts=("h2", "h3"),
        attackers={"h1": AttackerConfig(11.0, 14.0, 42_000, payload_bytes=900)},
        ruleset_text=_rules(1000003)),
}


def preset(name: str, **overrides) -> ScenarioConfig:
    key = {"baseline": "baseline", "i": "I", "ii": "II", "iii": "III"}.get(str(name).lower())
    if key is None:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return dataclasses.replace(PRESETS[key], **overrides)


_INT_KEYS = {"ping_payload_bytes", "pingall_spacing_us", "server_capacity_pps",
             "server_queue_limit", "event_filter_count", "event_filter_seconds", "seed"}
_FLOAT_KEYS = {"duration_s", "ping_interval_s", "ping_start_s"}
_BOOL_KEYS = {"pingall", "defense"}
_LATENCY_PREFIX = "latency_"


def load_config(path, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Read ``key = value`` overrides; ``[attacker hN]`` sections replace the attackers.

    A ``scenario`` key picks the preset the overrides apply to.
    """
    parser = configparser.ConfigParser(default_section="__none__", interpolation=None)
    try:
        text = Path(path).read_text(encoding="utf-8")
        parser.read_string("[run]\n" + text, source=str(path))
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None

    run = dict(parser["run"])
    cfg = preset(run.pop("scenario")) if "scenario" in run else (base or ScenarioConfig())
    changes = {}
    lat = {}
    try:
        for key, value in run.items():
            if key in _INT_KEYS:
                changes[key] = int(value)
            elif key in _FLOAT_KEYS:
                changes[key] = float(value)
            elif key in _BOOL_KEYS:
                changes[key] = parser["run"].getboolean(key)
            elif key == "benign_hosts":
                changes[key] = tuple(h.strip() for h in value.split(",") if h.strip())
            elif key == "ruleset":
                changes["ruleset_path"] = value
            elif key.startswith(_LATENCY_PREFIX):
                name = key[len(_LATENCY_PREFIX):].removesuffix("_us")
                if name not in Latencies.__dataclass_fields__:
                    raise ConfigError(f"unknown latency {key!r}")
                lat[name] = int(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")

        attackers = {}
        for section in parser.sections():
            if section == "run":
                continue
            kind, _, host = section.partition(" ")
            if kind != "attacker" or not host:
                raise ConfigError(f"unknown section [{section}]")
            s = parser[section]
            attackers[host.strip()] = AttackerConfig(
                start_s=float(s["start_s"]), stop_s=float(s["stop_s"]),
                rate_pps=int(s["rate_pps"]), payload_bytes=int(s.get("payload_bytes", "0")),
                spoofed_src=s.get("spoofed_src"))
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if attackers:
        changes["attackers"] = attackers
    if lat:
        changes["latencies"] = dataclasses.replace(cfg.latencies, **lat)
    return dataclasses.replace(cfg, **changes).validate()
