"""Arbitration-ready artifacts: PDF report, trips CSV, ZIP bundle, preview.

Displayed figures come straight from the engine's integer cents; rendering
never recomputes money. PDF and ZIP output are deterministic given the
document (which carries its generation timestamp), so fixtures can be
golden-file tested.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import textwrap
import zipfile
from dataclasses import dataclass
from datetime import datetime, timezone

from .models import DeactivationCase, LostWageEstimate, Platform, Trip
from .money import format_dollars, round_half_even
from .pdf import PdfBuilder
from .wire import format_instant, parse_instant

CSV_COLUMNS = [
    "trip_id",
    "platform",
    "start_time",
    "end_time",
    "start_lat",
    "start_lon",
    "end_lat",
    "end_lon",
    "driver_pay_cents",
    "customer_charge_cents",
    "tips_cents",
    "bonus_cents",
]

INTEREST_METHOD_NOTE = (
    "Interest method: simple (non-compounding) annual interest at the case rate,"
    " accrued on each day's lost wages from that day through the as-of date,"
    " actual/365 day count, rounded half-to-even once at the end. The governing"
    " rules state the rate but not the accrual mechanics; this report applies the"
    " method above uniformly."
)

FALLBACK_NOTE = (
    "Statutory fallback applied: the fixed daily rate replaces computed average"
    " earnings because platform earnings data was unavailable or set aside."
)

SHORT_HISTORY_NOTE = (
    "Note: the driver's earliest recorded trip falls inside the reference period;"
    " the daily average still divides by the full reference period length."
)


@dataclass(frozen=True)
class ReportDocument:
    case: DeactivationCase
    driver_name: str
    driver_contact: str | None  # None when redacted
    estimate: LostWageEstimate
    generated_at: datetime
    engine_version: str
    redacted: bool = False


def build_document(
    case: DeactivationCase,
    driver_name: str,
    driver_contact: str,
    estimate: LostWageEstimate,
    generated_at: datetime,
    engine_version: str,
    redact: bool = False,
) -> ReportDocument:
    return ReportDocument(
        case=case,
        driver_name="[redacted]" if redact else driver_name,
        driver_contact=None if redact else driver_contact,
        estimate=estimate,
        generated_at=generated_at.astimezone(timezone.utc),
        engine_version=engine_version,
        redacted=redact,
    )


def render_preview(doc: ReportDocument) -> dict:
    """JSON-ready view of the document; the single source every other
    surface (dashboard, CLI) displays verbatim."""
    case, est = doc.case, doc.estimate
    p = case.params
    return {
        "case": {
            "case_id": case.case_id,
            "driver_id": case.driver_id,
            "platform": case.platform.value,
            "deactivation_date": case.deactivation_date.isoformat(),
            "reactivation_date": (
                case.reactivation_date.isoformat() if case.reactivation_date else None
            ),
            "as_of_date": case.as_of_date.isoformat(),
            "use_fallback": case.use_fallback,
        },
        "params": {
            "reference_days": p.reference_days,
            "interest_rate_bp": p.interest_rate_bp,
            "fallback_daily_cents": p.fallback_daily,
            "interest_day_count": p.interest_day_count,
            "case_timezone": p.case_timezone,
            "include_tips": p.include_tips,
        },
        "driver": {"name": doc.driver_name, "contact": doc.driver_contact},
        "window": {
            "start": est.window.window_start.isoformat(),
            "end": est.window.window_end.isoformat(),
            "total_cents": est.window.window_total,
            "daily": [[d.isoformat(), cents] for d, cents in est.window.daily_totals],
        },
        "daily_average_cents": round_half_even(est.daily_average_exact),
        "daily_average_exact": str(est.daily_average_exact),
        "daily_average_display": format_dollars(round_half_even(est.daily_average_exact)),
        "deactivation_days": est.deactivation_days,
        "principal_cents": est.principal,
        "principal_display": format_dollars(est.principal),
        "interest_cents": est.interest,
        "interest_display": format_dollars(est.interest),
        "total_cents": est.total,
        "total_display": format_dollars(est.total),
        "fallback_used": est.fallback_used,
        "short_history": est.short_history,
        "interest_method": INTEREST_METHOD_NOTE,
        "generated_at": format_instant(doc.generated_at),
        "engine_version": doc.engine_version,
        "redacted": doc.redacted,
    }


def render_pdf(doc: ReportDocument, clock: datetime | None = None) -> bytes:
    """Single self-contained PDF; byte-identical for identical inputs."""
    stamp = (clock or doc.generated_at).astimezone(timezone.utc)
    case, est = doc.case, doc.estimate
    p = case.params

    builder = PdfBuilder(
        producer=f"wageclaim {doc.engine_version}", creation_date=stamp
    )
    builder.new_page()
    left = 54
    y = 740

    builder.text(left, y, 17, "LOST WAGE ESTIMATE", font="helv-bold")
    y -= 16
    builder.text(left, y, 10, f"Case {case.case_id}")
    builder.hline(left, 558, y - 6)
    y -= 26

    driver_line = f"Driver: {doc.driver_name}"
    if doc.driver_contact:
        driver_line += f" ({doc.driver_contact})"
    platform_label = "Uber" if case.platform is Platform.UBER else "Lyft"
    react = (
        case.reactivation_date.isoformat() if case.reactivation_date else "not reactivated"
    )
    meta_lines = [
        driver_line,
        f"Platform: {platform_label}",
        f"Deactivated: {case.deactivation_date.isoformat()}"
        f"    Reactivated: {react}    As of: {case.as_of_date.isoformat()}",
        f"Reference period: {est.window.window_start.isoformat()} to"
        f" {est.window.window_end.isoformat()} ({p.reference_days} days,"
        f" end exclusive), timezone {p.case_timezone}",
        f"Interest rate: {p.interest_rate_bp / 100:.2f}% simple annual"
        f" (actual/{p.interest_day_count})",
        f"Fallback daily rate: {format_dollars(p.fallback_daily)}"
        f" ({'applied' if est.fallback_used else 'not applied'})",
        f"Earnings counted: driver pay + bonus"
        f"{' + tips' if p.include_tips else ' (tips excluded)'}",
    ]
    for line in meta_lines:
        builder.text(left, y, 10, line)
        y -= 14

    y -= 10
    builder.hline(left, 558, y + 6)
    totals = [
        ("Window earnings total", format_dollars(est.window.window_total)),
        ("Daily average", format_dollars(round_half_even(est.daily_average_exact))),
        ("Days deactivated", str(est.deactivation_days)),
        ("Principal", format_dollars(est.principal)),
        ("Interest", format_dollars(est.interest)),
        ("Total", format_dollars(est.total)),
    ]
    for label, value in totals:
        builder.text(left, y - 12, 12, f"{label}: {value}", font="helv-bold")
        y -= 16
    y -= 8

    notes = []
    if est.fallback_used:
        notes.append(FALLBACK_NOTE)
    if est.short_history:
        notes.append(SHORT_HISTORY_NOTE)
    for note in notes:
        for line in textwrap.wrap(note, width=104):
            builder.text(left, y, 8.5, line)
            y -= 11
        y -= 4

    # Reference-period table, one row per day, flowing over columns/pages.
    builder.text(left, y, 11, "Daily earnings over the reference period", font="helv-bold")
    y -= 8
    col_x = (left, 330)
    rows_top = y - 14
    row_h = 10.5
    min_y = 120
    col = 0
    row_y = rows_top
    for day, cents in est.window.daily_totals:
        if row_y < min_y:
            col += 1
            if col >= len(col_x):
                _footer(builder, doc, stamp)
                builder.new_page()
                col = 0
                rows_top = 740
            row_y = rows_top
        builder.text(
            col_x[col], row_y, 8, f"{day.isoformat()}  {format_dollars(cents):>14}",
            font="mono",
        )
        row_y -= row_h

    _footer(builder, doc, stamp, with_method_note=True)
    return builder.render()


def _footer(
    builder: PdfBuilder, doc: ReportDocument, stamp: datetime,
    with_method_note: bool = False,
) -> None:
    y = 96
    if with_method_note:
        builder.hline(54, 558, y + 8, width=0.4)
        for line in textwrap.wrap(INTEREST_METHOD_NOTE, width=118):
            builder.text(54, y, 7.5, line)
            y -= 9.5
    builder.text(
        54, 40, 7.5,
        f"Generated {format_instant(stamp)} by wageclaim {doc.engine_version}",
    )


def render_csv(trips: list[Trip] | tuple[Trip, ...]) -> bytes:
    """RFC 4180 CSV of raw trips; money as integer cents, coordinates at a
    fixed 6 decimal places, header always present."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for t in trips:
        writer.writerow(
            [
                t.trip_id,
                t.platform.value,
                format_instant(t.start_time),
                format_instant(t.end_time),
                f"{t.start_lat:.6f}",
                f"{t.start_lon:.6f}",
                f"{t.end_lat:.6f}",
                f"{t.end_lon:.6f}",
                t.driver_pay,
                t.customer_charge,
                t.tips,
                t.bonus,
            ]
        )
    return buf.getvalue().encode("utf-8")


def parse_csv(data: bytes, account_id: str = "csv-import") -> list[Trip]:
    """Inverse of render_csv. The CSV intentionally carries no account
    linkage, so parsed trips take the provided placeholder account_id."""
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    rows = list(reader)
    if not rows or rows[0] != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    trips = []
    for row in rows[1:]:
        (trip_id, platform, start, end, slat, slon, elat, elon,
         pay, charge, tips, bonus) = row
        trips.append(
            Trip(
                trip_id=trip_id,
                account_id=account_id,
                platform=Platform(platform),
                start_time=parse_instant(start),
                end_time=parse_instant(end),
                start_lat=float(slat),
                start_lon=float(slon),
                end_lat=float(elat),
                end_lon=float(elon),
                driver_pay=int(pay),
                customer_charge=int(charge),
                tips=int(tips),
                bonus=int(bonus),
            )
        )
    return trips


def render_zip(
    doc: ReportDocument, trips: list[Trip] | tuple[Trip, ...],
    clock: datetime | None = None,
) -> bytes:
    """report.pdf + trips.csv + manifest.json with member digests."""
    stamp = (clock or doc.generated_at).astimezone(timezone.utc)
    pdf_bytes = render_pdf(doc, stamp)
    csv_bytes = render_csv(trips)
    manifest = {
        "case_id": doc.case.case_id,
        "generated_at": format_instant(stamp),
        "engine_version": doc.engine_version,
        "members": {
            "report.pdf": _digest(pdf_bytes),
            "trips.csv": _digest(csv_bytes),
        },
    }
    manifest_bytes = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8")

    zstamp = (stamp.year, stamp.month, stamp.day, stamp.hour, stamp.minute,
              stamp.second)
    out = io.BytesIO()
    with zipfile.ZipFile(out, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, payload in (
            ("report.pdf", pdf_bytes),
            ("trips.csv", csv_bytes),
            ("manifest.json", manifest_bytes),
        ):
            info = zipfile.ZipInfo(name, date_time=zstamp)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, payload)
    return out.getvalue()


def _digest(payload: bytes) -> dict:
    return {
        "sha256": hashlib.sha256(payload).hexdigest(),
        "bytes": len(payload),
    }
