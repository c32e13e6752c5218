"""Simulated payroll-data provider.

Stands in for the third-party connector: holds synthetic platform-side trip
histories, emits signed webhook deliveries on account link and daily
refresh, and injects sync failures at a configurable, deterministic rate.
Everything is reproducible from the scenario seed; failure counts are chosen
by rounded proportion, not sampled, so fixtures are exact.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence
from zoneinfo import ZoneInfo

from .models import InvalidParameterError, Platform, Trip
from .money import round_half_even
from .wire import (
    DELIVERY_ID_HEADER,
    SIGNATURE_HEADER,
    canonical_body,
    format_instant,
    parse_instant,
    sign_body,
    trip_from_json,
    trip_to_json,
)

DEFAULT_BATCH_SIZE = 500

# Synthetic trips hover around Seattle; coordinates are fixed to 6 decimal
# places so CSV round-trips are bit-exact.
_HOME_LAT = 47.6062
_HOME_LON = -122.3321
_HOME_TZ = ZoneInfo("America/Los_Angeles")


class DeliveryEvent(str, Enum):
    ACCOUNT_CONNECTED = "ACCOUNT_CONNECTED"
    TRIPS_ADDED = "TRIPS_ADDED"
    SYNC_FAILED = "SYNC_FAILED"


class FailMode(str, Enum):
    NONE = "NONE"
    SYNC_FAILURE = "SYNC_FAILURE"
    PARTIAL = "PARTIAL"


class UnknownAccountError(KeyError):
    pass


@dataclass
class ConnectorAccount:
    connector_account_id: str
    platform: Platform
    credential_hint: str
    trips: list[Trip] = field(default_factory=list)
    fail_mode: FailMode = FailMode.NONE


@dataclass
class WebhookEnvelope:
    delivery_id: str
    event: DeliveryEvent
    connector_account_id: str
    payload: tuple[Trip, ...]
    emitted_at: datetime
    attempt: int = 1
    final: bool = False
    error: str | None = None

    def body(self) -> bytes:
        doc = {
            "delivery_id": self.delivery_id,
            "event": self.event.value,
            "connector_account_id": self.connector_account_id,
            "emitted_at": format_instant(self.emitted_at),
            "attempt": self.attempt,
            "final": self.final,
            "payload": [trip_to_json(t) for t in self.payload],
        }
        if self.error is not None:
            doc["error"] = self.error
        return canonical_body(doc)


@dataclass
class DeliveryRecord:
    envelope: WebhookEnvelope
    acknowledged: bool


@dataclass
class LinkResult:
    connector_account_id: str
    deliveries: list[DeliveryRecord]

    @property
    def all_acknowledged(self) -> bool:
        return all(d.acknowledged for d in self.deliveries)


@dataclass(frozen=True)
class ScenarioCase:
    """Optional case fixture replayed by the CLI after sync completes."""

    driver_index: int
    deactivation_date: date
    reactivation_date: date | None = None
    as_of_date: date | None = None
    use_fallback: bool = False
    reference_days: int | None = None
    interest_rate_bp: int | None = None
    fallback_daily: int | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    accounts: int = 0
    platform_mix: float = 0.5  # fraction of accounts on Uber
    failure_rate: float = 0.0
    trips_per_day_min: int = 0
    trips_per_day_max: int = 4
    pay_min_cents: int = 500
    pay_max_cents: int = 4500
    tip_probability: float = 0.35
    tip_max_cents: int = 900
    bonus_probability: float = 0.05
    bonus_max_cents: int = 1500
    range_start: date = date(2024, 1, 1)
    range_end: date = date(2024, 6, 1)  # exclusive
    decline_share_rate: float = 0.0
    cases: tuple[ScenarioCase, ...] = ()

    def __post_init__(self) -> None:
        if self.accounts < 0:
            raise InvalidParameterError("accounts must be >= 0")
        for name, frac in (
            ("platform_mix", self.platform_mix),
            ("failure_rate", self.failure_rate),
            ("tip_probability", self.tip_probability),
            ("bonus_probability", self.bonus_probability),
            ("decline_share_rate", self.decline_share_rate),
        ):
            if not 0.0 <= frac <= 1.0:
                raise InvalidParameterError(f"{name} must be in [0, 1]")
        if self.trips_per_day_min < 0 or self.trips_per_day_max < self.trips_per_day_min:
            raise InvalidParameterError("bad trips_per_day range")
        if self.pay_min_cents < 0 or self.pay_max_cents < self.pay_min_cents:
            raise InvalidParameterError("bad pay range")
        if self.range_end <= self.range_start:
            raise InvalidParameterError("range_end must be after range_start")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = dict(data)
        for key in ("range_start", "range_end"):
            if key in known:
                known[key] = date.fromisoformat(known[key])
        raw_cases = known.pop("cases", [])
        cases = []
        for entry in raw_cases:
            cases.append(
                ScenarioCase(
                    driver_index=int(entry["driver_index"]),
                    deactivation_date=date.fromisoformat(entry["deactivation_date"]),
                    reactivation_date=(
                        date.fromisoformat(entry["reactivation_date"])
                        if entry.get("reactivation_date")
                        else None
                    ),
                    as_of_date=(
                        date.fromisoformat(entry["as_of_date"])
                        if entry.get("as_of_date")
                        else None
                    ),
                    use_fallback=bool(entry.get("use_fallback", False)),
                    reference_days=entry.get("reference_days"),
                    interest_rate_bp=entry.get("interest_rate_bp"),
                    fallback_daily=entry.get("fallback_daily"),
                )
            )
        known["cases"] = tuple(cases)
        unknown = set(known) - {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        if unknown:
            raise InvalidParameterError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**known)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# A transport delivers one signed request and reports whether the subscriber
# acknowledged it (2xx). Signature: (endpoint, body, headers) -> bool.
Transport = Callable[[str, bytes, dict[str, str]], bool]


def http_transport(endpoint: str, body: bytes, headers: dict[str, str]) -> bool:
    import httpx

    response = httpx.post(endpoint, content=body, headers=headers, timeout=30.0)
    return response.status_code < 300


class PayrollConnector:
    """The platform-side half of the sync pipeline.

    Per-account deliveries are emitted strictly in order (ACCOUNT_CONNECTED
    first); unacknowledged envelopes are re-sent by the next daily_refresh
    with the same delivery_id and an incremented attempt counter.
    """

    def __init__(
        self,
        secret: str,
        transport: Transport | None = None,
        batch_size: int = DEFAULT_BATCH_SIZE,
        latency_range: tuple[float, float] = (0.0, 0.0),
    ):
        self.secret = secret
        self.transport = transport or http_transport
        self.batch_size = batch_size
        self.latency_range = latency_range  # seconds, after time compression
        self.accounts: dict[str, ConnectorAccount] = {}
        self._subscribers: dict[str, str] = {}
        self._delivered_through: dict[str, int] = {}  # trips already enveloped
        self._pending: list[DeliveryRecord] = []
        self._delivery_counter = 0
        self._clock = lambda: datetime.now(tz=_HOME_TZ)

    # ---- scenario seeding ----

    def seed(self, profile: ScenarioConfig) -> list[ConnectorAccount]:
        """Generate the platform-side world deterministically from the seed.

        Uber/Lyft split and the failure count are exact rounded proportions
        of the account count; which accounts fail is a seeded draw.
        """
        rng = random.Random(profile.seed)
        uber_count = round_half_even(Fraction(profile.platform_mix).limit_denominator(10**9) * profile.accounts)
        failure_count = round_half_even(
            Fraction(profile.failure_rate).limit_denominator(10**9) * profile.accounts
        )

        accounts: list[ConnectorAccount] = []
        for idx in range(profile.accounts):
            platform = Platform.UBER if idx < uber_count else Platform.LYFT
            account_id = f"conn-{profile.seed}-{idx:04d}"
            accounts.append(
                ConnectorAccount(
                    connector_account_id=account_id,
                    platform=platform,
                    credential_hint=f"driver{idx:04d}@example.test",
                    trips=self._generate_history(rng, account_id, platform, profile),
                )
            )

        for account in rng.sample(accounts, failure_count):
            account.fail_mode = FailMode.SYNC_FAILURE

        self.accounts = {a.connector_account_id: a for a in accounts}
        self._subscribers.clear()
        self._delivered_through.clear()
        self._pending.clear()
        self._delivery_counter = 0
        return accounts

    def _generate_history(
        self,
        rng: random.Random,
        account_id: str,
        platform: Platform,
        profile: ScenarioConfig,
    ) -> list[Trip]:
        trips: list[Trip] = []
        seq = 0
        day = profile.range_start
        while day < profile.range_end:
            for _ in range(rng.randint(profile.trips_per_day_min, profile.trips_per_day_max)):
                local = datetime(
                    day.year, day.month, day.day,
                    rng.randrange(24), rng.randrange(60), rng.randrange(60),
                    tzinfo=_HOME_TZ,
                )
                # Pin the offset in effect at that moment so DST gaps and
                # folds cannot produce end-before-start instants.
                start = local.astimezone(timezone(local.utcoffset()))
                pay = rng.randint(profile.pay_min_cents, profile.pay_max_cents)
                charge = pay + rng.randint(200, max(201, pay // 2 + 200))
                tips = (
                    rng.randint(0, profile.tip_max_cents)
                    if rng.random() < profile.tip_probability
                    else 0
                )
                bonus = (
                    rng.randint(0, profile.bonus_max_cents)
                    if rng.random() < profile.bonus_probability
                    else 0
                )
                lat = round(_HOME_LAT + rng.uniform(-0.22, 0.22), 6)
                lon = round(_HOME_LON + rng.uniform(-0.25, 0.25), 6)
                trips.append(
                    Trip(
                        trip_id=f"{account_id}:{seq:06d}",
                        account_id=account_id,
                        platform=platform,
                        start_time=start,
                        end_time=start + timedelta(minutes=rng.randint(6, 55)),
                        start_lat=lat,
                        start_lon=lon,
                        end_lat=round(lat + rng.uniform(-0.08, 0.08), 6),
                        end_lon=round(lon + rng.uniform(-0.08, 0.08), 6),
                        driver_pay=pay,
                        customer_charge=charge,
                        tips=tips,
                        bonus=bonus,
                    )
                )
                seq += 1
            day += timedelta(days=1)
        trips.sort(key=lambda t: t.start_time)
        return trips

    # ---- webhook emission ----

    def _next_delivery_id(self) -> str:
        self._delivery_counter += 1
        return f"dlv-{self._delivery_counter:08d}"

    def _emit(self, endpoint: str, envelope: WebhookEnvelope) -> DeliveryRecord:
        low, high = self.latency_range
        if high > 0:
            time.sleep(random.uniform(low, high))
        body = envelope.body()
        headers = {
            "Content-Type": "application/json",
            DELIVERY_ID_HEADER: envelope.delivery_id,
            SIGNATURE_HEADER: sign_body(self.secret, body),
        }
        try:
            acked = self.transport(endpoint, body, headers)
        except Exception:
            acked = False
        record = DeliveryRecord(envelope=envelope, acknowledged=acked)
        if not acked:
            self._pending.append(record)
        return record

    def link_account(self, connector_account_id: str, subscriber_endpoint: str) -> LinkResult:
        """Connect an account and push its full history in order.

        Healthy accounts get ACCOUNT_CONNECTED followed by TRIPS_ADDED
        batches (<= batch_size trips each, last one marked final). Accounts
        in SYNC_FAILURE mode get ACCOUNT_CONNECTED then SYNC_FAILED; PARTIAL
        accounts stop mid-history without a final batch.
        """
        account = self.accounts.get(connector_account_id)
        if account is None:
            raise UnknownAccountError(connector_account_id)
        self._subscribers[connector_account_id] = subscriber_endpoint

        deliveries = [
            self._emit(
                subscriber_endpoint,
                WebhookEnvelope(
                    delivery_id=self._next_delivery_id(),
                    event=DeliveryEvent.ACCOUNT_CONNECTED,
                    connector_account_id=connector_account_id,
                    payload=(),
                    emitted_at=self._clock(),
                ),
            )
        ]

        if account.fail_mode is FailMode.SYNC_FAILURE:
            deliveries.append(
                self._emit(
                    subscriber_endpoint,
                    WebhookEnvelope(
                        delivery_id=self._next_delivery_id(),
                        event=DeliveryEvent.SYNC_FAILED,
                        connector_account_id=connector_account_id,
                        payload=(),
                        emitted_at=self._clock(),
                        error="provider-side sync error",
                    ),
                )
            )
            self._delivered_through[connector_account_id] = 0
            return LinkResult(connector_account_id, deliveries)

        history = account.trips
        if account.fail_mode is FailMode.PARTIAL:
            history = history[: max(1, len(history) // 2)]

        batches = [
            history[i : i + self.batch_size]
            for i in range(0, len(history), self.batch_size)
        ] or [[]]
        for i, batch in enumerate(batches):
            is_last = i == len(batches) - 1
            deliveries.append(
                self._emit(
                    subscriber_endpoint,
                    WebhookEnvelope(
                        delivery_id=self._next_delivery_id(),
                        event=DeliveryEvent.TRIPS_ADDED,
                        connector_account_id=connector_account_id,
                        payload=tuple(batch),
                        emitted_at=self._clock(),
                        final=is_last and account.fail_mode is FailMode.NONE,
                    ),
                )
            )
        self._delivered_through[connector_account_id] = len(history)
        return LinkResult(connector_account_id, deliveries)

    def daily_refresh(self) -> list[DeliveryRecord]:
        """Push trip deltas for linked accounts and retry unacknowledged
        deliveries (same delivery_id, attempt + 1)."""
        records: list[DeliveryRecord] = []

        retries, self._pending = self._pending, []
        for old in retries:
            envelope = old.envelope
            envelope.attempt += 1
            records.append(
                self._emit(self._subscribers[envelope.connector_account_id], envelope)
            )

        for account_id, endpoint in self._subscribers.items():
            account = self.accounts[account_id]
            if account.fail_mode is FailMode.SYNC_FAILURE:
                continue
            sent = self._delivered_through.get(account_id, 0)
            new_trips = account.trips[sent:]
            if not new_trips:
                continue
            for i in range(0, len(new_trips), self.batch_size):
                batch = new_trips[i : i + self.batch_size]
                records.append(
                    self._emit(
                        endpoint,
                        WebhookEnvelope(
                            delivery_id=self._next_delivery_id(),
                            event=DeliveryEvent.TRIPS_ADDED,
                            connector_account_id=account_id,
                            payload=tuple(batch),
                            emitted_at=self._clock(),
                            final=i + self.batch_size >= len(new_trips),
                        ),
                    )
                )
            self._delivered_through[account_id] = len(account.trips)
        return records

    # ---- post-seed mutation (new platform activity) ----

    def add_trips(self, connector_account_id: str, trips: Sequence[Trip]) -> None:
        account = self.accounts.get(connector_account_id)
        if account is None:
            raise UnknownAccountError(connector_account_id)
        account.trips.extend(trips)
        account.trips.sort(key=lambda t: t.start_time)

    # ---- persistence (the simulator's own state, not the case store) ----

    def save_state(self, path: str | Path) -> None:
        doc = {
            "delivery_counter": self._delivery_counter,
            "subscribers": dict(sorted(self._subscribers.items())),
            "delivered_through": dict(sorted(self._delivered_through.items())),
            "accounts": [
                {
                    "connector_account_id": a.connector_account_id,
                    "platform": a.platform.value,
                    "credential_hint": a.credential_hint,
                    "fail_mode": a.fail_mode.value,
                    "trips": [trip_to_json(t) for t in a.trips],
                }
                for a in self.accounts.values()
            ],
        }
        Path(path).write_text(
            json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8"
        )

    def load_state(self, path: str | Path) -> None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        self.accounts = {}
        for entry in doc["accounts"]:
            account = ConnectorAccount(
                connector_account_id=entry["connector_account_id"],
                platform=Platform(entry["platform"]),
                credential_hint=entry["credential_hint"],
                trips=[trip_from_json(t) for t in entry["trips"]],
                fail_mode=FailMode(entry["fail_mode"]),
            )
            self.accounts[account.connector_account_id] = account
        self._subscribers = dict(doc.get("subscribers", {}))
        self._delivered_through = dict(doc.get("delivered_through", {}))
        self._delivery_counter = int(doc.get("delivery_counter", 0))
        self._pending = []
