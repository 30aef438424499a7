from .config import (
    AttackerConfig,
    ConfigError,
    Latencies,
    PRESETS,
    ScenarioConfig,
    load_config,
    preset,
)
from .dump import format_flow_table, parse_dump
from .engine import EventLog, EventQueue, Simulator
from .metrics import MetricsReport, metrics_csv, summary_row, timeseries_csv
from .run import RunResult, run
from .traffic import flood_times, generate_flood, generate_ping, pingall
from .world import World, build_topology
