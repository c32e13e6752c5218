"""Brute-force re-computation of lost-wage estimates.

This is the verification path: it walks every trip for every window day and
every accrual day one at a time, shares no code with the engine beyond the
domain types, and rounds through Python's built-in round() on Fraction. The
CLI `oracle` command and the equivalence tests diff its numbers against the
engine's; the two sides must agree to the cent.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from fractions import Fraction

from .models import DeactivationCase, Trip


@dataclass(frozen=True)
class OracleEstimate:
    window_total: int
    daily_totals: tuple[tuple[date, int], ...]
    deactivation_days: int
    principal: int
    interest: int
    total: int
    fallback_used: bool


def _count_days(start: date, end_exclusive: date) -> int:
    # Deliberately counts by stepping one day at a time instead of
    # subtracting dates, so the engine's calendar arithmetic has an
    # independent witness.
    n = 0
    cur = start
    while cur < end_exclusive:
        cur += timedelta(days=1)
        n += 1
    return n


def brute_force_estimate(
    case: DeactivationCase,
    trips: list[Trip] | tuple[Trip, ...],
    *,
    sync_failed: bool = False,
) -> OracleEstimate:
    """Recompute the full estimate for a case by exhaustive iteration."""
    params = case.params
    tz = params.tzinfo()

    local_dates = [
        (t, t.start_time.astimezone(tz).date())
        for t in trips
        if t.platform == case.platform
    ]

    daily: list[tuple[date, int]] = []
    window_total = 0
    day = case.deactivation_date - timedelta(days=params.reference_days)
    while day < case.deactivation_date:
        amount = 0
        for trip, local in local_dates:
            if local == day:
                amount += trip.driver_pay + trip.bonus
                if params.include_tips:
                    amount += trip.tips
        daily.append((day, amount))
        window_total += amount
        day += timedelta(days=1)

    period_end = case.as_of_date
    if case.reactivation_date is not None and case.reactivation_date < period_end:
        period_end = case.reactivation_date
    deactivation_days = _count_days(case.deactivation_date, period_end)

    fallback_used = case.use_fallback or (sync_failed and window_total == 0)
    if fallback_used:
        daily_average = Fraction(params.fallback_daily)
    else:
        daily_average = Fraction(window_total, params.reference_days)

    principal_exact = Fraction(0)
    accrual_day = case.deactivation_date
    for _ in range(deactivation_days):
        principal_exact += daily_average
        accrual_day += timedelta(days=1)
    principal = round(principal_exact)

    rate = Fraction(params.interest_rate_bp, 10_000)
    interest_exact = Fraction(0)
    accrual_day = case.deactivation_date
    for _ in range(deactivation_days):
        outstanding_days = _count_days(accrual_day, case.as_of_date)
        interest_exact += (
            daily_average * rate * Fraction(outstanding_days, params.interest_day_count)
        )
        accrual_day += timedelta(days=1)
    interest = round(interest_exact)

    return OracleEstimate(
        window_total=window_total,
        daily_totals=tuple(daily),
        deactivation_days=deactivation_days,
        principal=principal,
        interest=interest,
        total=principal + interest,
        fallback_used=fallback_used,
    )
