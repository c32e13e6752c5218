"""Shared builders for tests: trip factories and randomized case generation.

The randomized generator deliberately piles trips onto window edges and
local-midnight boundary times, carried in assorted timezones, because date
bucketing under timezone conversion is where an engine bug would hide.
"""

from __future__ import annotations

import random
from datetime import date, datetime, time, timedelta, timezone
from zoneinfo import ZoneInfo

from wageclaim.models import DeactivationCase, Platform, PolicyParams, Trip

TIMEZONES = [
    "America/Los_Angeles",
    "America/New_York",
    "America/Chicago",
    "America/Anchorage",
    "UTC",
    "Pacific/Auckland",
    "Asia/Kolkata",
    "Europe/Berlin",
]


def make_trip(
    trip_id: str = "t1",
    account_id: str = "acct1",
    platform: Platform = Platform.UBER,
    start: datetime | None = None,
    duration_min: int = 25,
    driver_pay: int = 1500,
    customer_charge: int = 2000,
    tips: int = 0,
    bonus: int = 0,
    lat: float = 47.6062,
    lon: float = -122.3321,
) -> Trip:
    if start is None:
        start = datetime(2024, 5, 1, 10, 0, tzinfo=timezone(timedelta(hours=-7)))
    return Trip(
        trip_id=trip_id,
        account_id=account_id,
        platform=platform,
        start_time=start,
        end_time=start + timedelta(minutes=duration_min),
        start_lat=round(lat, 6),
        start_lon=round(lon, 6),
        end_lat=round(lat + 0.01, 6),
        end_lon=round(lon + 0.01, 6),
        driver_pay=driver_pay,
        customer_charge=customer_charge,
        tips=tips,
        bonus=bonus,
    )


def daily_trips(
    deactivation: date,
    days: int,
    per_day_total: int,
    platform: Platform = Platform.UBER,
    account_id: str = "acct1",
) -> list[Trip]:
    """One trip per day for the `days` days preceding deactivation."""
    tz = timezone(timedelta(hours=-8))
    trips = []
    for k in range(days):
        d = deactivation - timedelta(days=days - k)
        pay = per_day_total
        trips.append(
            make_trip(
                trip_id=f"t{k:04d}",
                account_id=account_id,
                platform=platform,
                start=datetime(d.year, d.month, d.day, 9, 30, tzinfo=tz),
                driver_pay=pay,
                customer_charge=pay * 2,
            )
        )
    return trips


def random_case(rng: random.Random, case_id: str = "case") -> DeactivationCase:
    deact = date(2024, 1, 1) + timedelta(days=rng.randrange(0, 400))
    params = PolicyParams(
        reference_days=rng.choice([84, 84, 84, 84, 7, 30, 120]),
        interest_rate_bp=rng.choice([1200, 1200, 1200, 0, 500, 1850]),
        interest_day_count=rng.choice([365, 365, 360]),
        case_timezone=rng.choice(TIMEZONES),
        include_tips=rng.random() < 0.9,
    )
    react = None
    if rng.random() < 0.4:
        react = deact + timedelta(days=rng.randrange(0, 200))
    return DeactivationCase(
        case_id=case_id,
        driver_id="drv-rand",
        platform=rng.choice([Platform.UBER, Platform.LYFT]),
        deactivation_date=deact,
        as_of_date=deact + timedelta(days=rng.randrange(0, 180)),
        reactivation_date=react,
        params=params,
        use_fallback=rng.random() < 0.1,
    )


def random_trips_for_case(
    rng: random.Random, case: DeactivationCase, n_trips: int
) -> list[Trip]:
    """Trips scattered around the case window, boundary-heavy.

    Half the start times sit within an hour of local midnight in the case
    timezone, and half of all instants are re-expressed in a different zone,
    so bucketing must survive offset conversion at day edges.
    """
    case_tz = case.params.tzinfo()
    ref_days = case.params.reference_days
    trips = []
    for i in range(n_trips):
        day_offset = rng.randrange(-ref_days - 2, 3)
        local_day = case.deactivation_date + timedelta(days=day_offset)
        if rng.random() < 0.5:
            hour = rng.choice([0, 0, 23, 23, 1, 22])
            minute = rng.randrange(60)
        else:
            hour, minute = rng.randrange(24), rng.randrange(60)
        start = datetime.combine(local_day, time(hour, minute), tzinfo=case_tz)
        if rng.random() < 0.5:
            start = start.astimezone(ZoneInfo(rng.choice(TIMEZONES)))
        platform = case.platform if rng.random() < 0.8 else (
            Platform.LYFT if case.platform is Platform.UBER else Platform.UBER
        )
        pay = rng.randrange(0, 6000)
        trips.append(
            make_trip(
                trip_id=f"rt{i:05d}",
                platform=platform,
                start=start,
                duration_min=rng.randrange(5, 90),
                driver_pay=pay,
                customer_charge=pay + rng.randrange(0, 3000),
                tips=rng.randrange(0, 800) if rng.random() < 0.4 else 0,
                bonus=rng.randrange(0, 500) if rng.random() < 0.1 else 0,
            )
        )
    return trips
