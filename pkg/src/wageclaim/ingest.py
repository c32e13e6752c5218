"""Webhook receiver: verify, deduplicate, normalize, write idempotently.

Input is hostile until the HMAC check passes. A delivery_id we have already
processed is acknowledged without touching the store, and every trip batch
lands atomically: one invalid row quarantines the whole batch to the
dead-letter table rather than inserting the rest, because a partially
ingested history is worse evidence than a visibly broken one.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .models import InvalidParameterError, Trip
from .store import Store
from .wire import parse_instant, signature_valid, trip_from_json

logger = logging.getLogger(__name__)


class SyncState(str, Enum):
    PENDING = "PENDING"
    SYNCING = "SYNCING"
    SYNCED = "SYNCED"
    FAILED = "FAILED"


class IngestStatus(str, Enum):
    INSERTED = "INSERTED"
    DUPLICATE = "DUPLICATE"
    REJECTED_SIGNATURE = "REJECTED_SIGNATURE"
    REJECTED_MALFORMED = "REJECTED_MALFORMED"


@dataclass(frozen=True)
class SyncStatus:
    account_id: str
    state: SyncState
    last_event_at: str | None
    trips_ingested: int
    last_error: str | None


@dataclass(frozen=True)
class IngestResult:
    status: IngestStatus
    trips_inserted: int = 0
    account_id: str | None = None
    detail: str | None = None


class UnknownAccountError(KeyError):
    pass


_EVENTS = {"ACCOUNT_CONNECTED", "TRIPS_ADDED", "SYNC_FAILED"}


def _dead_letter(store: Store, reason: str, raw_body: bytes) -> IngestResult:
    store.add_dead_letter(reason, raw_body)
    logger.warning("webhook dead-lettered: %s", reason)
    return IngestResult(IngestStatus.REJECTED_MALFORMED, detail=reason)


def handle_webhook(store: Store, secret: str, raw_body: bytes, signature: str) -> IngestResult:
    """Process one webhook delivery end to end."""
    if not signature or not signature_valid(secret, raw_body, signature):
        # Nothing persisted for unauthenticated input, not even a dead letter.
        return IngestResult(IngestStatus.REJECTED_SIGNATURE)

    try:
        doc = json.loads(raw_body)
    except (ValueError, UnicodeDecodeError):
        return _dead_letter(store, "body is not valid JSON", raw_body)

    if not isinstance(doc, dict):
        return _dead_letter(store, "body is not a JSON object", raw_body)
    event = doc.get("event")
    delivery_id = doc.get("delivery_id")
    account_id = doc.get("connector_account_id")
    if event not in _EVENTS or not delivery_id or not account_id:
        return _dead_letter(store, "missing or unknown envelope fields", raw_body)
    try:
        attempt = int(doc.get("attempt", 1))
        emitted_at = parse_instant(doc["emitted_at"]).astimezone(timezone.utc)
        final = bool(doc.get("final", False))
        payload = doc.get("payload", [])
        if not isinstance(payload, list):
            raise ValueError("payload must be a list")
    except (KeyError, ValueError, TypeError) as exc:
        return _dead_letter(store, f"bad envelope field: {exc}", raw_body)

    account = store.get_account(account_id)
    if account is None:
        return _dead_letter(store, f"unknown account {account_id}", raw_body)

    if store.delivery_seen(delivery_id):
        return IngestResult(
            IngestStatus.DUPLICATE, account_id=account_id,
            detail=f"delivery {delivery_id} already processed",
        )

    event_at = emitted_at.isoformat()

    if event == "TRIPS_ADDED":
        try:
            trips = _normalized_trips(payload, account_id)
        except (InvalidParameterError, KeyError, ValueError, TypeError) as exc:
            return _dead_letter(store, f"invalid trip in batch: {exc}", raw_body)

        with store.transaction() as conn:
            inserted = Store.tx_insert_trips(conn, trips)
            state = SyncState.SYNCED if final else SyncState.SYNCING
            if account["state"] == SyncState.SYNCED.value and not final:
                state = SyncState.SYNCED  # refresh deltas don't regress status
            Store.tx_update_account_sync(
                conn, account_id, state.value, event_at, None,
                final_seen=True if final else None,
            )
            Store.tx_record_delivery(conn, delivery_id, event, account_id, attempt)
        return IngestResult(
            IngestStatus.INSERTED, trips_inserted=inserted, account_id=account_id
        )

    if event == "SYNC_FAILED":
        error = str(doc.get("error") or "connector reported sync failure")
        with store.transaction() as conn:
            Store.tx_update_account_sync(
                conn, account_id, SyncState.FAILED.value, event_at, error
            )
            Store.tx_record_delivery(conn, delivery_id, event, account_id, attempt)
        return IngestResult(
            IngestStatus.INSERTED, account_id=account_id, detail="sync failure recorded"
        )

    # ACCOUNT_CONNECTED: (re)start syncing unless already complete.
    with store.transaction() as conn:
        state = (
            SyncState.SYNCED
            if account["state"] == SyncState.SYNCED.value
            else SyncState.SYNCING
        )
        Store.tx_update_account_sync(conn, account_id, state.value, event_at, None)
        Store.tx_record_delivery(conn, delivery_id, event, account_id, attempt)
    return IngestResult(IngestStatus.INSERTED, account_id=account_id)


def _normalized_trips(payload: list, account_id: str) -> list[Trip]:
    """Validate and normalize a trip batch.

    Trips must belong to the envelope's account. Coordinates are quantized
    to 6 decimal places (the export precision) and timestamps are kept as
    exact instants; UTC conversion happens at the storage boundary.
    """
    trips = []
    for entry in payload:
        trip = trip_from_json(entry)
        if trip.account_id != account_id:
            raise InvalidParameterError(
                f"trip {trip.trip_id} belongs to {trip.account_id},"
                f" envelope is for {account_id}"
            )
        trips.append(
            Trip(
                trip_id=trip.trip_id,
                account_id=trip.account_id,
                platform=trip.platform,
                start_time=trip.start_time,
                end_time=trip.end_time,
                start_lat=round(trip.start_lat, 6),
                start_lon=round(trip.start_lon, 6),
                end_lat=round(trip.end_lat, 6),
                end_lon=round(trip.end_lon, 6),
                driver_pay=trip.driver_pay,
                customer_charge=trip.customer_charge,
                tips=trip.tips,
                bonus=trip.bonus,
            )
        )
    return trips


def sync_status(store: Store, account_id: str) -> SyncStatus:
    row = store.get_account(account_id)
    if row is None:
        raise UnknownAccountError(account_id)
    return SyncStatus(
        account_id=account_id,
        state=SyncState(row["state"]),
        last_event_at=row["last_event_at"],
        trips_ingested=row["trips_ingested"],
        last_error=row["last_error"],
    )


def finalize_account(store: Store, account_id: str) -> SyncStatus:
    """Settle an account's status once its declared history has arrived.

    The connector marks the last batch of a history push `final`; if that
    has been seen and the account has not failed, the account is SYNCED.
    """
    row = store.get_account(account_id)
    if row is None:
        raise UnknownAccountError(account_id)
    if row["final_seen"] and row["state"] not in (
        SyncState.FAILED.value, SyncState.SYNCED.value,
    ):
        with store.transaction() as conn:
            Store.tx_update_account_sync(
                conn, account_id, SyncState.SYNCED.value,
                row["last_event_at"] or datetime.now(tz=timezone.utc).isoformat(),
                row["last_error"],
            )
    return sync_status(store, account_id)
