"""Domain types shared across the claim pipeline.

Validation lives in the constructors: a Trip or DeactivationCase that exists
is one whose invariants hold. All money fields are integer cents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from fractions import Fraction
from zoneinfo import ZoneInfo


class Platform(str, Enum):
    UBER = "UBER"
    LYFT = "LYFT"


class InvalidParameterError(ValueError):
    """A caller-supplied parameter violates a documented precondition."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InvalidParameterError(message)


@dataclass(frozen=True)
class Trip:
    """One completed ride as reported by the payroll connector."""

    trip_id: str
    account_id: str
    platform: Platform
    start_time: datetime
    end_time: datetime
    start_lat: float
    start_lon: float
    end_lat: float
    end_lon: float
    driver_pay: int
    customer_charge: int
    tips: int
    bonus: int

    def __post_init__(self) -> None:
        _require(bool(self.trip_id), "trip_id must be non-empty")
        _require(bool(self.account_id), "account_id must be non-empty")
        _require(
            self.start_time.tzinfo is not None and self.end_time.tzinfo is not None,
            f"trip {self.trip_id}: timestamps must carry a UTC offset",
        )
        _require(
            self.start_time <= self.end_time,
            f"trip {self.trip_id}: start_time after end_time",
        )
        for name, lat in (("start_lat", self.start_lat), ("end_lat", self.end_lat)):
            _require(-90.0 <= lat <= 90.0, f"trip {self.trip_id}: {name} out of range")
        for name, lon in (("start_lon", self.start_lon), ("end_lon", self.end_lon)):
            _require(-180.0 <= lon <= 180.0, f"trip {self.trip_id}: {name} out of range")
        for name, cents in (
            ("driver_pay", self.driver_pay),
            ("customer_charge", self.customer_charge),
            ("tips", self.tips),
            ("bonus", self.bonus),
        ):
            _require(
                isinstance(cents, int) and cents >= 0,
                f"trip {self.trip_id}: {name} must be non-negative integer cents",
            )


@dataclass(frozen=True)
class PolicyParams:
    """Knobs of the lost-wage computation, with statutory defaults.

    interest_rate_bp is an annual simple-interest rate in basis points
    (1200 = 12%). include_tips controls whether tips count as daily earnings;
    the default treats all driver-received money as earnings.
    """

    reference_days: int = 84
    interest_rate_bp: int = 1200
    fallback_daily: int = 20000
    interest_day_count: int = 365
    case_timezone: str = "America/Los_Angeles"
    include_tips: bool = True

    def __post_init__(self) -> None:
        _require(self.reference_days >= 1, "reference_days must be >= 1")
        _require(self.interest_rate_bp >= 0, "interest_rate_bp must be >= 0")
        _require(self.fallback_daily >= 0, "fallback_daily must be >= 0")
        _require(self.interest_day_count >= 1, "interest_day_count must be >= 1")
        try:
            ZoneInfo(self.case_timezone)
        except Exception as exc:
            raise InvalidParameterError(
                f"unknown timezone {self.case_timezone!r}"
            ) from exc

    def tzinfo(self) -> ZoneInfo:
        return ZoneInfo(self.case_timezone)


@dataclass(frozen=True)
class DeactivationCase:
    """A driver's deactivation under review, with its policy parameters."""

    case_id: str
    driver_id: str
    platform: Platform
    deactivation_date: date
    as_of_date: date
    reactivation_date: date | None = None
    params: PolicyParams = field(default_factory=PolicyParams)
    use_fallback: bool = False

    def __post_init__(self) -> None:
        if self.reactivation_date is not None:
            _require(
                self.reactivation_date >= self.deactivation_date,
                "reactivation_date before deactivation_date",
            )
        _require(
            self.as_of_date >= self.deactivation_date,
            "as_of_date before deactivation_date",
        )


@dataclass(frozen=True)
class EarningsWindow:
    """Per-day earnings over the reference period preceding deactivation.

    window_end is exclusive and equals the deactivation date; days without
    trips appear with amount 0, so len(daily_totals) == reference_days always.
    """

    window_start: date
    window_end: date
    daily_totals: tuple[tuple[date, int], ...]
    window_total: int


@dataclass(frozen=True)
class LostWageEstimate:
    """Complete output of the lost-wage computation for one case.

    daily_average_exact is the exact daily rate the principal and interest
    were computed from: window_total / reference_days normally, or the
    statutory fallback daily amount when fallback_used is set.
    """

    window: EarningsWindow
    daily_average_exact: Fraction
    deactivation_days: int
    principal: int
    interest: int
    total: int
    fallback_used: bool
    short_history: bool = False


@dataclass(frozen=True)
class TakeRateResult:
    """Share of rider price (excluding tips) retained by the platform.

    value is None when no trip has customer_charge > tips (undefined, not an
    error). clamped marks inconsistent source data that pushed the raw ratio
    outside [0, 1] before clamping.
    """

    value: Fraction | None
    clamped: bool = False
