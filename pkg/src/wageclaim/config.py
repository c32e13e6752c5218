"""Key-value (INI) configuration for the service, connector, and OTP sink.

Everything has a workable default so tests and demos run with no file at
all. The config path can be given explicitly or via WAGECLAIM_CONFIG.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path

ENV_VAR = "WAGECLAIM_CONFIG"


@dataclass(frozen=True)
class AppConfig:
    database: str = "data/wageclaim.db"
    consent_mode: str = "OPT_IN"  # OPT_OUT grants org share at verification
    default_timezone: str = "America/Los_Angeles"
    driver_report_access: bool = False
    webhook_secret: str = "dev-secret-change-me"
    connector_endpoint: str = "http://127.0.0.1:8700/webhooks/connector"
    connector_state_path: str = "data/connector_state.json"
    connector_batch_size: int = 500
    # Demo pacing: the provider's 2-24 h sync latency divided by this factor.
    time_compression: float = 3600.0
    latency_hours_min: float = 0.0
    latency_hours_max: float = 0.0
    otp_sink_path: str = "data/otp_outbox.log"

    @property
    def latency_range_seconds(self) -> tuple[float, float]:
        if self.latency_hours_max <= 0 or self.time_compression <= 0:
            return (0.0, 0.0)
        scale = 3600.0 / self.time_compression
        return (self.latency_hours_min * scale, self.latency_hours_max * scale)


def load_config(path: str | Path | None = None) -> AppConfig:
    if path is None:
        path = os.environ.get(ENV_VAR)
    if path is None or not Path(path).exists():
        return AppConfig()

    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    service = parser["service"] if parser.has_section("service") else {}
    connector = parser["connector"] if parser.has_section("connector") else {}
    otp = parser["otp"] if parser.has_section("otp") else {}

    defaults = AppConfig()
    mode = str(service.get("consent_mode", defaults.consent_mode)).upper()
    if mode not in ("OPT_IN", "OPT_OUT"):
        raise ValueError(f"consent_mode must be OPT_IN or OPT_OUT, got {mode!r}")
    return AppConfig(
        database=service.get("database", defaults.database),
        consent_mode=mode,
        default_timezone=service.get("default_timezone", defaults.default_timezone),
        driver_report_access=_as_bool(
            service.get("driver_report_access"), defaults.driver_report_access
        ),
        webhook_secret=connector.get("secret", defaults.webhook_secret),
        connector_endpoint=connector.get("endpoint", defaults.connector_endpoint),
        connector_state_path=connector.get(
            "state_path", defaults.connector_state_path
        ),
        connector_batch_size=int(
            connector.get("batch_size", defaults.connector_batch_size)
        ),
        time_compression=float(
            connector.get("time_compression", defaults.time_compression)
        ),
        latency_hours_min=float(
            connector.get("latency_hours_min", defaults.latency_hours_min)
        ),
        latency_hours_max=float(
            connector.get("latency_hours_max", defaults.latency_hours_max)
        ),
        otp_sink_path=otp.get("sink", defaults.otp_sink_path),
    )


def _as_bool(raw, default: bool) -> bool:
    if raw is None:
        return default
    return str(raw).strip().lower() in ("1", "true", "yes", "on")
