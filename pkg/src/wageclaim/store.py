"""Embedded transactional persistence on sqlite3.

One writer-serialized connection per Store. Consent and audit tables are
append-only: revocation stamps a timestamp onto the existing row, nothing is
ever deleted. Trip timestamps are normalized to UTC with the original UTC
offset kept alongside, so exports reproduce the instants exactly as
delivered.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
from contextlib import contextmanager
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from .models import DeactivationCase, Platform, PolicyParams, Trip

_SCHEMA = """
CREATE TABLE IF NOT EXISTS drivers (
    driver_id TEXT PRIMARY KEY,
    contact TEXT NOT NULL UNIQUE,
    display_name TEXT NOT NULL,
    preferred_language TEXT,
    state TEXT NOT NULL DEFAULT 'PENDING_VERIFY',
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS otp_challenges (
    challenge_id TEXT PRIMARY KEY,
    driver_id TEXT NOT NULL REFERENCES drivers(driver_id),
    code TEXT NOT NULL,
    attempts INTEGER NOT NULL DEFAULT 0,
    locked INTEGER NOT NULL DEFAULT 0,
    verified_at TEXT,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS consents (
    consent_id TEXT PRIMARY KEY,
    driver_id TEXT NOT NULL REFERENCES drivers(driver_id),
    scope TEXT NOT NULL,
    granted_at TEXT NOT NULL,
    revoked_at TEXT
);
CREATE TABLE IF NOT EXISTS accounts (
    account_id TEXT PRIMARY KEY,
    driver_id TEXT REFERENCES drivers(driver_id),
    platform TEXT NOT NULL,
    state TEXT NOT NULL DEFAULT 'PENDING',
    last_event_at TEXT,
    trips_ingested INTEGER NOT NULL DEFAULT 0,
    last_error TEXT,
    final_seen INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS trips (
    account_id TEXT NOT NULL REFERENCES accounts(account_id),
    trip_id TEXT NOT NULL,
    platform TEXT NOT NULL,
    start_utc TEXT NOT NULL,
    end_utc TEXT NOT NULL,
    start_offset_min INTEGER NOT NULL,
    end_offset_min INTEGER NOT NULL,
    start_lat REAL NOT NULL,
    start_lon REAL NOT NULL,
    end_lat REAL NOT NULL,
    end_lon REAL NOT NULL,
    driver_pay_cents INTEGER NOT NULL,
    customer_charge_cents INTEGER NOT NULL,
    tips_cents INTEGER NOT NULL,
    bonus_cents INTEGER NOT NULL,
    PRIMARY KEY (account_id, trip_id)
);
CREATE INDEX IF NOT EXISTS trips_by_start ON trips(account_id, start_utc);
CREATE TABLE IF NOT EXISTS deliveries (
    delivery_id TEXT PRIMARY KEY,
    event TEXT NOT NULL,
    account_id TEXT NOT NULL,
    attempt INTEGER NOT NULL,
    received_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS dead_letters (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    received_at TEXT NOT NULL,
    reason TEXT NOT NULL,
    raw_body BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS cases (
    case_id TEXT PRIMARY KEY,
    driver_id TEXT NOT NULL REFERENCES drivers(driver_id),
    platform TEXT NOT NULL,
    deactivation_date TEXT NOT NULL,
    reactivation_date TEXT,
    as_of_date TEXT NOT NULL,
    reference_days INTEGER NOT NULL,
    interest_rate_bp INTEGER NOT NULL,
    fallback_daily_cents INTEGER NOT NULL,
    interest_day_count INTEGER NOT NULL,
    case_timezone TEXT NOT NULL,
    include_tips INTEGER NOT NULL DEFAULT 1,
    use_fallback INTEGER NOT NULL DEFAULT 0,
    created_by TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS audit_log (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    at TEXT NOT NULL,
    actor_id TEXT NOT NULL,
    actor_role TEXT NOT NULL,
    action TEXT NOT NULL,
    case_id TEXT,
    detail TEXT
);
CREATE TABLE IF NOT EXISTS policy_defaults (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""

_TABLES = {
    "drivers", "otp_challenges", "consents", "accounts", "trips",
    "deliveries", "dead_letters", "cases", "audit_log", "policy_defaults",
}


def _utcnow() -> str:
    return datetime.now(tz=timezone.utc).isoformat()


def _trip_row(trip: Trip) -> tuple:
    start_utc = trip.start_time.astimezone(timezone.utc)
    end_utc = trip.end_time.astimezone(timezone.utc)
    start_off = trip.start_time.utcoffset() or timedelta(0)
    end_off = trip.end_time.utcoffset() or timedelta(0)
    return (
        trip.account_id,
        trip.trip_id,
        trip.platform.value,
        start_utc.isoformat(),
        end_utc.isoformat(),
        int(start_off.total_seconds() // 60),
        int(end_off.total_seconds() // 60),
        trip.start_lat,
        trip.start_lon,
        trip.end_lat,
        trip.end_lon,
        trip.driver_pay,
        trip.customer_charge,
        trip.tips,
        trip.bonus,
    )


def _trip_from_row(row: sqlite3.Row) -> Trip:
    start = datetime.fromisoformat(row["start_utc"]).astimezone(
        timezone(timedelta(minutes=row["start_offset_min"]))
    )
    end = datetime.fromisoformat(row["end_utc"]).astimezone(
        timezone(timedelta(minutes=row["end_offset_min"]))
    )
    return Trip(
        trip_id=row["trip_id"],
        account_id=row["account_id"],
        platform=Platform(row["platform"]),
        start_time=start,
        end_time=end,
        start_lat=row["start_lat"],
        start_lon=row["start_lon"],
        end_lat=row["end_lat"],
        end_lon=row["end_lon"],
        driver_pay=row["driver_pay_cents"],
        customer_charge=row["customer_charge_cents"],
        tips=row["tips_cents"],
        bonus=row["bonus_cents"],
    )


def case_from_row(row: sqlite3.Row) -> DeactivationCase:
    params = PolicyParams(
        reference_days=row["reference_days"],
        interest_rate_bp=row["interest_rate_bp"],
        fallback_daily=row["fallback_daily_cents"],
        interest_day_count=row["interest_day_count"],
        case_timezone=row["case_timezone"],
        include_tips=bool(row["include_tips"]),
    )
    return DeactivationCase(
        case_id=row["case_id"],
        driver_id=row["driver_id"],
        platform=Platform(row["platform"]),
        deactivation_date=date.fromisoformat(row["deactivation_date"]),
        reactivation_date=(
            date.fromisoformat(row["reactivation_date"])
            if row["reactivation_date"]
            else None
        ),
        as_of_date=date.fromisoformat(row["as_of_date"]),
        params=params,
        use_fallback=bool(row["use_fallback"]),
    )


class Store:
    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.isolation_level = None  # explicit BEGIN/COMMIT below
        self._lock = threading.RLock()
        with self._lock:
            # executescript manages its own commit; keep it out of transaction()
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        self._conn.close()

    @contextmanager
    def transaction(self):
        with self._lock:
            self._conn.execute("BEGIN IMMEDIATE")
            try:
                yield self._conn
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
            else:
                self._conn.execute("COMMIT")

    def _query(self, sql: str, params: tuple = ()) -> list[sqlite3.Row]:
        with self._lock:
            return self._conn.execute(sql, params).fetchall()

    def _one(self, sql: str, params: tuple = ()) -> sqlite3.Row | None:
        rows = self._query(sql, params)
        return rows[0] if rows else None

    def row_count(self, table: str) -> int:
        if table not in _TABLES:
            raise ValueError(f"unknown table {table!r}")
        row = self._one(f"SELECT COUNT(*) AS n FROM {table}")
        return row["n"] if row else 0

    # ---- drivers ----

    def insert_driver(
        self, driver_id: str, contact: str, display_name: str,
        preferred_language: str | None,
    ) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO drivers (driver_id, contact, display_name,"
                " preferred_language, created_at) VALUES (?, ?, ?, ?, ?)",
                (driver_id, contact, display_name, preferred_language, _utcnow()),
            )

    def get_driver(self, driver_id: str) -> sqlite3.Row | None:
        return self._one("SELECT * FROM drivers WHERE driver_id = ?", (driver_id,))

    def get_driver_by_contact(self, contact: str) -> sqlite3.Row | None:
        return self._one("SELECT * FROM drivers WHERE contact = ?", (contact,))

    def set_driver_state(self, driver_id: str, state: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "UPDATE drivers SET state = ? WHERE driver_id = ?", (state, driver_id)
            )

    def list_drivers(self) -> list[sqlite3.Row]:
        return self._query("SELECT * FROM drivers ORDER BY driver_id")

    # ---- OTP challenges ----

    def create_challenge(self, challenge_id: str, driver_id: str, code: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO otp_challenges (challenge_id, driver_id, code,"
                " created_at) VALUES (?, ?, ?, ?)",
                (challenge_id, driver_id, code, _utcnow()),
            )

    def active_challenge(self, driver_id: str) -> sqlite3.Row | None:
        return self._one(
            "SELECT * FROM otp_challenges WHERE driver_id = ?"
            " ORDER BY created_at DESC, challenge_id DESC LIMIT 1",
            (driver_id,),
        )

    def bump_challenge_attempts(self, challenge_id: str, locked: bool) -> None:
        with self.transaction() as conn:
            conn.execute(
                "UPDATE otp_challenges SET attempts = attempts + 1, locked = ?"
                " WHERE challenge_id = ?",
                (1 if locked else 0, challenge_id),
            )

    def mark_challenge_verified(self, challenge_id: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "UPDATE otp_challenges SET verified_at = ? WHERE challenge_id = ?",
                (_utcnow(), challenge_id),
            )

    # ---- consents (append-only) ----

    def insert_consent(self, consent_id: str, driver_id: str, scope: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO consents (consent_id, driver_id, scope, granted_at)"
                " VALUES (?, ?, ?, ?)",
                (consent_id, driver_id, scope, _utcnow()),
            )

    def get_consent(self, consent_id: str) -> sqlite3.Row | None:
        return self._one("SELECT * FROM consents WHERE consent_id = ?", (consent_id,))

    def active_consent(self, driver_id: str, scope: str) -> sqlite3.Row | None:
        return self._one(
            "SELECT * FROM consents WHERE driver_id = ? AND scope = ?"
            " AND revoked_at IS NULL ORDER BY granted_at DESC LIMIT 1",
            (driver_id, scope),
        )

    def revoke_consent(self, consent_id: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "UPDATE consents SET revoked_at = ? WHERE consent_id = ?"
                " AND revoked_at IS NULL",
                (_utcnow(), consent_id),
            )

    def consents_for_driver(self, driver_id: str) -> list[sqlite3.Row]:
        return self._query(
            "SELECT * FROM consents WHERE driver_id = ? ORDER BY granted_at",
            (driver_id,),
        )

    # ---- accounts ----

    def insert_account(
        self, account_id: str, driver_id: str | None, platform: str
    ) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO accounts (account_id, driver_id, platform)"
                " VALUES (?, ?, ?)",
                (account_id, driver_id, platform),
            )

    def get_account(self, account_id: str) -> sqlite3.Row | None:
        return self._one("SELECT * FROM accounts WHERE account_id = ?", (account_id,))

    def accounts_for_driver(
        self, driver_id: str, platform: str | None = None
    ) -> list[sqlite3.Row]:
        if platform is None:
            return self._query(
                "SELECT * FROM accounts WHERE driver_id = ? ORDER BY account_id",
                (driver_id,),
            )
        return self._query(
            "SELECT * FROM accounts WHERE driver_id = ? AND platform = ?"
            " ORDER BY account_id",
            (driver_id, platform),
        )

    def list_accounts(self) -> list[sqlite3.Row]:
        return self._query("SELECT * FROM accounts ORDER BY account_id")

    # ---- trips ----

    def trips_for_account(self, account_id: str) -> list[Trip]:
        rows = self._query(
            "SELECT * FROM trips WHERE account_id = ? ORDER BY start_utc, trip_id",
            (account_id,),
        )
        return [_trip_from_row(r) for r in rows]

    def trips_for_driver(
        self, driver_id: str, platform: str | None = None
    ) -> list[Trip]:
        sql = (
            "SELECT t.* FROM trips t JOIN accounts a ON a.account_id = t.account_id"
            " WHERE a.driver_id = ?"
        )
        params: tuple = (driver_id,)
        if platform is not None:
            sql += " AND t.platform = ?"
            params += (platform,)
        sql += " ORDER BY t.start_utc, t.trip_id"
        return [_trip_from_row(r) for r in self._query(sql, params)]

    def trip_count(self, account_id: str) -> int:
        row = self._one(
            "SELECT COUNT(*) AS n FROM trips WHERE account_id = ?", (account_id,)
        )
        return row["n"] if row else 0

    # ---- deliveries ----

    def delivery_seen(self, delivery_id: str) -> bool:
        return self._one(
            "SELECT 1 AS x FROM deliveries WHERE delivery_id = ?", (delivery_id,)
        ) is not None

    # ---- in-transaction building blocks (for the ingestion pipeline) ----
    # These take the open connection from `with store.transaction() as conn`
    # so a webhook's trip insert, status update, and delivery record land
    # atomically or not at all.

    @staticmethod
    def tx_insert_trips(conn: sqlite3.Connection, trips: list[Trip]) -> int:
        inserted = 0
        for trip in trips:
            cur = conn.execute(
                "INSERT OR IGNORE INTO trips (account_id, trip_id, platform,"
                " start_utc, end_utc, start_offset_min, end_offset_min,"
                " start_lat, start_lon, end_lat, end_lon, driver_pay_cents,"
                " customer_charge_cents, tips_cents, bonus_cents)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                _trip_row(trip),
            )
            inserted += cur.rowcount
        return inserted

    @staticmethod
    def tx_record_delivery(
        conn: sqlite3.Connection, delivery_id: str, event: str,
        account_id: str, attempt: int,
    ) -> None:
        conn.execute(
            "INSERT INTO deliveries (delivery_id, event, account_id, attempt,"
            " received_at) VALUES (?, ?, ?, ?, ?)",
            (delivery_id, event, account_id, attempt, _utcnow()),
        )

    @staticmethod
    def tx_update_account_sync(
        conn: sqlite3.Connection, account_id: str, state: str,
        last_event_at: str, last_error: str | None = None,
        final_seen: bool | None = None,
    ) -> None:
        conn.execute(
            "UPDATE accounts SET state = ?, last_event_at = ?, last_error = ?,"
            " trips_ingested = (SELECT COUNT(*) FROM trips WHERE account_id = ?),"
            " final_seen = COALESCE(?, final_seen) WHERE account_id = ?",
            (
                state,
                last_event_at,
                last_error,
                account_id,
                None if final_seen is None else (1 if final_seen else 0),
                account_id,
            ),
        )

    # ---- dead letters ----

    def add_dead_letter(self, reason: str, raw_body: bytes) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO dead_letters (received_at, reason, raw_body)"
                " VALUES (?, ?, ?)",
                (_utcnow(), reason, raw_body),
            )

    def list_dead_letters(self) -> list[sqlite3.Row]:
        return self._query("SELECT * FROM dead_letters ORDER BY id")

    # ---- cases ----

    def insert_case(self, case: DeactivationCase, created_by: str) -> None:
        p = case.params
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO cases (case_id, driver_id, platform,"
                " deactivation_date, reactivation_date, as_of_date,"
                " reference_days, interest_rate_bp, fallback_daily_cents,"
                " interest_day_count, case_timezone, include_tips, use_fallback,"
                " created_by, created_at)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    case.case_id,
                    case.driver_id,
                    case.platform.value,
                    case.deactivation_date.isoformat(),
                    case.reactivation_date.isoformat()
                    if case.reactivation_date
                    else None,
                    case.as_of_date.isoformat(),
                    p.reference_days,
                    p.interest_rate_bp,
                    p.fallback_daily,
                    p.interest_day_count,
                    p.case_timezone,
                    1 if p.include_tips else 0,
                    1 if case.use_fallback else 0,
                    created_by,
                    _utcnow(),
                ),
            )

    def get_case(self, case_id: str) -> DeactivationCase | None:
        row = self._one("SELECT * FROM cases WHERE case_id = ?", (case_id,))
        return case_from_row(row) if row else None

    def list_cases(self) -> list[sqlite3.Row]:
        return self._query("SELECT * FROM cases ORDER BY case_id")

    # ---- audit (append-only) ----

    def append_audit(
        self, actor_id: str, actor_role: str, action: str,
        case_id: str | None = None, detail: str | None = None,
    ) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO audit_log (at, actor_id, actor_role, action, case_id,"
                " detail) VALUES (?, ?, ?, ?, ?, ?)",
                (_utcnow(), actor_id, actor_role, action, case_id, detail),
            )

    def audit_entries(self, action: str | None = None) -> list[sqlite3.Row]:
        if action is None:
            return self._query("SELECT * FROM audit_log ORDER BY id")
        return self._query(
            "SELECT * FROM audit_log WHERE action = ? ORDER BY id", (action,)
        )

    # ---- policy defaults ----

    def get_policy_defaults(self) -> dict[str, str]:
        return {r["key"]: r["value"] for r in self._query("SELECT * FROM policy_defaults")}

    def set_policy_default(self, key: str, value: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO policy_defaults (key, value) VALUES (?, ?)"
                " ON CONFLICT(key) DO UPDATE SET value = excluded.value",
                (key, value),
            )

    # ---- summary / integrity ----

    def stats(self) -> dict:
        accounts = self.list_accounts()
        by_state: dict[str, int] = {}
        by_platform: dict[str, int] = {}
        synced_by_platform: dict[str, int] = {}
        for row in accounts:
            by_state[row["state"]] = by_state.get(row["state"], 0) + 1
            by_platform[row["platform"]] = by_platform.get(row["platform"], 0) + 1
            if row["state"] == "SYNCED":
                synced_by_platform[row["platform"]] = (
                    synced_by_platform.get(row["platform"], 0) + 1
                )
        trips = self._one("SELECT COUNT(*) AS n FROM trips")
        drivers = self._one("SELECT COUNT(*) AS n FROM drivers")
        cases = self._one("SELECT COUNT(*) AS n FROM cases")
        dead = self._one("SELECT COUNT(*) AS n FROM dead_letters")
        return {
            "accounts_created": len(accounts),
            "accounts_by_state": dict(sorted(by_state.items())),
            "accounts_by_platform": dict(sorted(by_platform.items())),
            "synced_by_platform": dict(sorted(synced_by_platform.items())),
            "drivers": drivers["n"] if drivers else 0,
            "trips": trips["n"] if trips else 0,
            "cases": cases["n"] if cases else 0,
            "dead_letters": dead["n"] if dead else 0,
        }

    def content_hash(self) -> str:
        """Digest of the durable, clock-independent content: accounts,
        trips, and cases. Identical seeds must yield identical hashes."""
        doc = {
            "accounts": [
                [r["account_id"], r["driver_id"], r["platform"], r["state"],
                 r["trips_ingested"], r["final_seen"]]
                for r in self.list_accounts()
            ],
            "trips": [
                list(r)
                for r in self._query(
                    "SELECT account_id, trip_id, platform, start_utc, end_utc,"
                    " start_offset_min, end_offset_min, start_lat, start_lon,"
                    " end_lat, end_lon, driver_pay_cents, customer_charge_cents,"
                    " tips_cents, bonus_cents FROM trips ORDER BY account_id, trip_id"
                )
            ],
            "cases": [
                [r["case_id"], r["driver_id"], r["platform"],
                 r["deactivation_date"], r["reactivation_date"], r["as_of_date"],
                 r["reference_days"], r["interest_rate_bp"],
                 r["fallback_daily_cents"], r["use_fallback"]]
                for r in self.list_cases()
            ],
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()
