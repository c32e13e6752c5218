"""Webhook wire format: JSON envelope bodies and HMAC signatures.

The connector signs the exact body bytes it sends; the receiver verifies
against the same bytes before parsing. Timestamps are RFC 3339 with an
explicit UTC offset. Money fields travel as integer cents.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from datetime import datetime

from .models import Platform, Trip

SIGNATURE_HEADER = "X-Signature"
DELIVERY_ID_HEADER = "X-Delivery-Id"


def format_instant(value: datetime) -> str:
    if value.tzinfo is None:
        raise ValueError("instants on the wire must carry a UTC offset")
    return value.isoformat()


def parse_instant(text: str) -> datetime:
    normalized = text.replace("Z", "+00:00") if text.endswith("Z") else text
    value = datetime.fromisoformat(normalized)
    if value.tzinfo is None:
        raise ValueError(f"instant without UTC offset: {text!r}")
    return value


def trip_to_json(trip: Trip) -> dict:
    return {
        "trip_id": trip.trip_id,
        "account_id": trip.account_id,
        "platform": trip.platform.value,
        "start_time": format_instant(trip.start_time),
        "end_time": format_instant(trip.end_time),
        "start_lat": trip.start_lat,
        "start_lon": trip.start_lon,
        "end_lat": trip.end_lat,
        "end_lon": trip.end_lon,
        "driver_pay_cents": trip.driver_pay,
        "customer_charge_cents": trip.customer_charge,
        "tips_cents": trip.tips,
        "bonus_cents": trip.bonus,
    }


def trip_from_json(data: dict) -> Trip:
    return Trip(
        trip_id=data["trip_id"],
        account_id=data["account_id"],
        platform=Platform(data["platform"]),
        start_time=parse_instant(data["start_time"]),
        end_time=parse_instant(data["end_time"]),
        start_lat=float(data["start_lat"]),
        start_lon=float(data["start_lon"]),
        end_lat=float(data["end_lat"]),
        end_lon=float(data["end_lon"]),
        driver_pay=int(data["driver_pay_cents"]),
        customer_charge=int(data["customer_charge_cents"]),
        tips=int(data["tips_cents"]),
        bonus=int(data["bonus_cents"]),
    )


def canonical_body(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def sign_body(secret: str, body: bytes) -> str:
    return hmac.new(secret.encode("utf-8"), body, hashlib.sha256).hexdigest()


def signature_valid(secret: str, body: bytes, signature: str) -> bool:
    return hmac.compare_digest(sign_body(secret, body), signature)
