"""Lost-wage computation: reference windows, daily averages, principal,
statutory fallback, simple interest, and platform take rate.

Pure functions over immutable inputs; no I/O and no shared state. All money
stays in integer cents or exact Fractions until a single terminal
round-half-even per reported figure.

Interest mechanics: simple (non-compounding) annual interest on each
deactivation day's lost wage, accrued from that day through the as-of date,
Actual/365 by default, rounded once at the end.
"""

from __future__ import annotations

from datetime import date, timedelta
from fractions import Fraction

from .models import (
    DeactivationCase,
    EarningsWindow,
    InvalidParameterError,
    LostWageEstimate,
    PolicyParams,
    TakeRateResult,
    Trip,
)
from .money import round_half_even


def trip_earnings(trip: Trip, *, include_tips: bool = True) -> int:
    """Driver-received money for one trip, in cents."""
    total = trip.driver_pay + trip.bonus
    if include_tips:
        total += trip.tips
    return total


def reference_window(
    case: DeactivationCase, trips: list[Trip] | tuple[Trip, ...]
) -> EarningsWindow:
    """Bucket the case platform's earnings per local calendar day over the
    reference period [deactivation - reference_days, deactivation).

    A trip belongs to the local date of its start time in the case timezone;
    trips spanning midnight count on their start date. Days without trips
    appear with amount 0, so the window always has reference_days entries.
    """
    params = case.params
    tz = params.tzinfo()
    start = case.deactivation_date - timedelta(days=params.reference_days)
    end = case.deactivation_date

    totals: dict[date, int] = {}
    for trip in trips:
        if trip.platform != case.platform:
            continue
        local_date = trip.start_time.astimezone(tz).date()
        if start <= local_date < end:
            totals[local_date] = totals.get(local_date, 0) + trip_earnings(
                trip, include_tips=params.include_tips
            )

    daily = tuple(
        (start + timedelta(days=k), totals.get(start + timedelta(days=k), 0))
        for k in range(params.reference_days)
    )
    return EarningsWindow(
        window_start=start,
        window_end=end,
        daily_totals=daily,
        window_total=sum(amount for _, amount in daily),
    )


def average_daily(window: EarningsWindow, reference_days: int) -> Fraction:
    """window_total / reference_days as an exact rational.

    The divisor is always reference_days, even when the driver worked fewer
    days of the window.
    """
    if reference_days <= 0:
        raise InvalidParameterError("reference_days must be >= 1")
    return Fraction(window.window_total, reference_days)


def deactivation_days(case: DeactivationCase) -> int:
    """Whole calendar days from deactivation to reactivation or the as-of
    date, whichever comes first. Zero when they coincide."""
    end = case.as_of_date
    if case.reactivation_date is not None and case.reactivation_date < end:
        end = case.reactivation_date
    return (end - case.deactivation_date).days


def interest_accrued(
    daily_average_exact: Fraction,
    deactivation_date: date,
    days: int,
    as_of_date: date,
    params: PolicyParams,
) -> int:
    """Simple annual interest over the deactivation period, in cents.

    Day k's lost wage accrues interest for the span from deactivation+k to
    the as-of date. Computed exactly, rounded half-even once.
    """
    if days < 0:
        raise InvalidParameterError("deactivation day count must be >= 0")
    if days == 0:
        return 0
    last_accrual_day = deactivation_date + timedelta(days=days - 1)
    if as_of_date < last_accrual_day:
        raise InvalidParameterError("as_of_date precedes an accrual day")

    # Sum of per-day outstanding spans: (D - k) for k in 0..days-1, where
    # D = days from deactivation to as_of. Closed form keeps this O(1); the
    # brute-force oracle walks the same days one at a time.
    span_to_as_of = (as_of_date - deactivation_date).days
    total_day_units = days * span_to_as_of - days * (days - 1) // 2

    rate = Fraction(params.interest_rate_bp, 10_000)
    exact = (
        daily_average_exact
        * rate
        * Fraction(total_day_units, params.interest_day_count)
    )
    return round_half_even(exact)


def lost_wage(
    case: DeactivationCase,
    trips: list[Trip] | tuple[Trip, ...],
    *,
    sync_failed: bool = False,
) -> LostWageEstimate:
    """Full estimate for a case: window, daily average, principal, interest.

    The statutory fallback daily rate replaces the computed average when the
    operator set use_fallback, or when the account's sync failed and the
    window holds no earnings at all; it is never applied silently over real
    data. Set sync_failed when the account's sync status is FAILED.
    """
    params = case.params
    window = reference_window(case, trips)
    days = deactivation_days(case)

    fallback_used = case.use_fallback or (sync_failed and window.window_total == 0)
    if fallback_used:
        daily_avg = Fraction(params.fallback_daily)
        principal = params.fallback_daily * days
    else:
        daily_avg = average_daily(window, params.reference_days)
        principal = round_half_even(
            Fraction(window.window_total * days, params.reference_days)
        )

    interest = interest_accrued(
        daily_avg, case.deactivation_date, days, case.as_of_date, params
    )

    platform_dates = [
        t.start_time.astimezone(params.tzinfo()).date()
        for t in trips
        if t.platform == case.platform
    ]
    short_history = bool(platform_dates) and min(platform_dates) > window.window_start

    return LostWageEstimate(
        window=window,
        daily_average_exact=daily_avg,
        deactivation_days=days,
        principal=principal,
        interest=interest,
        total=principal + interest,
        fallback_used=fallback_used,
        short_history=short_history,
    )


def take_rate(trips: list[Trip] | tuple[Trip, ...]) -> TakeRateResult:
    """Fraction of rider price (net of tips) the platform kept.

    Only trips where the customer paid more than the tip contribute. With no
    such trips the rate is undefined (value None). Inconsistent data that
    drives the raw ratio outside [0, 1] is clamped and flagged.
    """
    rider_price = 0
    driver_received = 0
    for trip in trips:
        if trip.customer_charge > trip.tips:
            rider_price += trip.customer_charge - trip.tips
            driver_received += trip.driver_pay + trip.bonus
    if rider_price == 0:
        return TakeRateResult(value=None)

    raw = Fraction(rider_price - driver_received, rider_price)
    if raw < 0:
        return TakeRateResult(value=Fraction(0), clamped=True)
    if raw > 1:
        return TakeRateResult(value=Fraction(1), clamped=True)
    return TakeRateResult(value=raw)
