"""Acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line (run with `pytest tests/test_acceptance.py -s`
to watch them stream). Tolerances are exact integer cents unless the
criterion states a runtime budget, which is asserted in wall-clock seconds.
"""

from __future__ import annotations

import functools
import random
import time
from dataclasses import replace
from datetime import date, datetime, timedelta, timezone

import pytest
from fastapi.testclient import TestClient

from wageclaim.api import create_app
from wageclaim.config import AppConfig
from wageclaim.connector import PayrollConnector, ScenarioConfig
from wageclaim.engine import lost_wage
from wageclaim.ingest import handle_webhook
from wageclaim.models import DeactivationCase, Platform, PolicyParams
from wageclaim.money import parse_dollars
from wageclaim.oracle import brute_force_estimate
from wageclaim.pdf import extract_texts
from wageclaim.reports import parse_csv
from wageclaim.service import Actor, CaseService, ReportFormat, Role
from wageclaim.store import Store
from wageclaim.wire import SIGNATURE_HEADER

from helpers import make_trip, random_case, random_trips_for_case

SECRET = "acceptance-secret"
ATTORNEY = Actor("acc-attorney", Role.ATTORNEY)

SCALE_PROFILE = ScenarioConfig(
    seed=42,
    accounts=178,
    platform_mix=78 / 143,
    failure_rate=0.20,
    trips_per_day_min=0,
    trips_per_day_max=2,
    range_start=date(2024, 1, 1),
    range_end=date(2024, 6, 1),
)


def criterion(label):
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[FAIL] {label} ({time.perf_counter() - start:.2f}s)")
                raise
            print(f"\n[PASS] {label} ({time.perf_counter() - start:.2f}s)")

        return inner

    return wrap


def fixture_store() -> tuple[Store, CaseService]:
    store = Store(":memory:")
    service = CaseService(store, AppConfig(webhook_secret=SECRET))
    return store, service


def install_driver(
    store: Store, idx: int, trips, platform=Platform.UBER,
    state="SYNCED", share_consent=True,
) -> str:
    """Fixture-path setup: driver + account + trips written directly."""
    driver_id = f"drv-{idx:04d}"
    account_id = f"acct-{idx:04d}"
    store.insert_driver(driver_id, f"driver{idx:04d}@example.test",
                        f"Driver {idx:04d}", None)
    store.set_driver_state(driver_id, "VERIFIED")
    if share_consent:
        store.insert_consent(f"cons-{idx:04d}", driver_id, "SHARE_WITH_ORG")
    store.insert_account(account_id, driver_id, platform.value)
    scoped = [replace(t, account_id=account_id) for t in trips]
    now = datetime.now(tz=timezone.utc).isoformat()
    with store.transaction() as conn:
        Store.tx_insert_trips(conn, scoped)
        Store.tx_update_account_sync(conn, account_id, state, now,
                                     "sync failed" if state == "FAILED" else None,
                                     final_seen=(state == "SYNCED"))
    return driver_id


# ---- 1. Fallback fixed point --------------------------------------------


@criterion("fallback fixed point: 7 days at $200/day -> $1,400.00 exactly")
def test_fallback_fixed_point():
    start = time.perf_counter()
    store, service = fixture_store()
    driver_id = install_driver(store, 1, [], state="FAILED")
    created = service.create_case(
        ATTORNEY,
        driver_id=driver_id,
        platform=Platform.UBER,
        deactivation_date=date(2024, 6, 1),
        reactivation_date=date(2024, 6, 8),
        as_of_date=date(2024, 7, 1),
        use_fallback=True,
    )
    preview, _, _ = service.get_report(
        ATTORNEY, created["case_id"], ReportFormat.JSON_PREVIEW
    )
    assert preview["fallback_used"] is True
    assert preview["principal_cents"] == 140000
    assert time.perf_counter() - start < 1.0


# ---- 2. Oracle equivalence over 200 randomized cases --------------------


@criterion("oracle equivalence: 200 randomized cases, exact cents, 200/200")
def test_oracle_equivalence_200_cases():
    start = time.perf_counter()
    rng = random.Random(20240601)
    matched = 0
    for i in range(200):
        case = random_case(rng, case_id=f"acc-{i}")
        trips = random_trips_for_case(rng, case, rng.randrange(0, 2001))
        sync_failed = rng.random() < 0.3
        engine = lost_wage(case, trips, sync_failed=sync_failed)
        oracle = brute_force_estimate(case, trips, sync_failed=sync_failed)
        assert engine.window.window_total == oracle.window_total, case
        assert engine.window.daily_totals == oracle.daily_totals, case
        assert engine.deactivation_days == oracle.deactivation_days, case
        assert engine.principal == oracle.principal, case
        assert engine.interest == oracle.interest, case
        assert engine.total == oracle.total, case
        assert engine.fallback_used == oracle.fallback_used, case
        matched += 1
    assert matched == 200
    assert time.perf_counter() - start < 10.0


# ---- 3. Defaults fidelity ------------------------------------------------


@criterion("defaults fidelity: no-params case == explicit (84d, 12%, $200/day), 50 sets")
def test_defaults_fidelity_50_sets():
    rng = random.Random(90210)
    store, service = fixture_store()
    figure_keys = [
        "daily_average_cents", "daily_average_exact", "deactivation_days",
        "principal_cents", "interest_cents", "total_cents", "fallback_used",
        "window",
    ]
    for k in range(50):
        probe = random_case(rng)
        trips = random_trips_for_case(rng, probe, rng.randrange(0, 80))
        driver_id = install_driver(store, k, trips, platform=probe.platform)

        shared = dict(
            driver_id=driver_id,
            platform=probe.platform,
            deactivation_date=probe.deactivation_date,
            reactivation_date=probe.reactivation_date,
            as_of_date=probe.as_of_date,
        )
        implicit = service.create_case(ATTORNEY, **shared)
        explicit = service.create_case(
            ATTORNEY, **shared,
            params={"reference_days": 84, "interest_rate_bp": 1200,
                    "fallback_daily": 20000},
        )
        a, _, _ = service.get_report(ATTORNEY, implicit["case_id"],
                                     ReportFormat.JSON_PREVIEW)
        b, _, _ = service.get_report(ATTORNEY, explicit["case_id"],
                                     ReportFormat.JSON_PREVIEW)
        for key in figure_keys:
            assert a[key] == b[key], (k, key)


# ---- 4. Idempotent ingestion at deployment scale -------------------------


def _replay(profile: ScenarioConfig, copies: int) -> Store:
    store = Store(":memory:")
    captured: list[tuple[bytes, dict]] = []
    connector = PayrollConnector(
        secret=SECRET,
        transport=lambda endpoint, body, headers: captured.append((body, headers))
        or True,
    )
    accounts = connector.seed(profile)
    for idx, account in enumerate(accounts):
        store.insert_driver(f"drv-{idx:04d}", account.credential_hint,
                            f"Driver {idx:04d}", None)
        store.insert_account(account.connector_account_id, f"drv-{idx:04d}",
                             account.platform.value)
        connector.link_account(account.connector_account_id, "memo://")
    for body, headers in captured:
        for _ in range(copies):
            result = handle_webhook(store, SECRET, body, headers[SIGNATURE_HEADER])
            assert result.status.value in ("INSERTED", "DUPLICATE")
    return store


@criterion("idempotent ingestion: 178-account scenario, everything delivered twice")
def test_idempotent_ingestion_178_accounts():
    once = _replay(SCALE_PROFILE, copies=1)
    twice = _replay(SCALE_PROFILE, copies=2)
    assert once.content_hash() == twice.content_hash()

    deact, as_of = date(2024, 6, 1), date(2024, 7, 1)
    for idx in range(SCALE_PROFILE.accounts):
        driver_id = f"drv-{idx:04d}"
        account = once.accounts_for_driver(driver_id)[0]
        case = DeactivationCase(
            case_id=f"case-{idx}", driver_id=driver_id,
            platform=Platform(account["platform"]),
            deactivation_date=deact, as_of_date=as_of,
        )
        first = lost_wage(case, once.trips_for_driver(driver_id, account["platform"]))
        second = lost_wage(case, twice.trips_for_driver(driver_id, account["platform"]))
        assert first == second, driver_id


# ---- 5. Sync-failure fidelity --------------------------------------------


@criterion("sync-failure fidelity: 178 accounts at 20% -> exactly 36 FAILED")
def test_sync_failure_fidelity():
    store, service = fixture_store()
    connector = PayrollConnector(secret=SECRET,
                                 transport=service.webhook_transport())
    service.connector = connector
    accounts = connector.seed(SCALE_PROFILE)
    from wageclaim.service import ConsentScope, Role as R

    field = Actor("acc-field", R.FIELD_REP)
    for idx, account in enumerate(accounts):
        enrolled = service.enroll_driver(field, account.credential_hint,
                                         f"Driver {idx:04d}")
        code = service.otp_channel.last_code_for(enrolled["driver_id"])
        service.verify_driver(field, enrolled["driver_id"], code)
        service.grant_consent(field, enrolled["driver_id"], ConsentScope.STUDY_ONLY)
        service.link_account(field, enrolled["driver_id"], account.platform,
                             account.connector_account_id)

    stats = store.stats()
    assert stats["accounts_created"] == 178
    assert stats["accounts_by_state"].get("FAILED", 0) == 36
    assert stats["accounts_by_state"].get("SYNCED", 0) in (142, 143)


# ---- 6. Consent gate matrix ----------------------------------------------


@criterion("consent gate: 5 roles x 3 consent states x 5 data endpoints, no leaks")
def test_consent_gate_matrix():
    start = time.perf_counter()
    store, service = fixture_store()
    client = TestClient(create_app(service))

    tz = timezone(timedelta(hours=-7))
    states = ["NONE", "STUDY_ONLY", "SHARE_WITH_ORG"]
    drivers = {}
    for i, consent_state in enumerate(states):
        trips = [
            make_trip(trip_id=f"m{i}-{k}",
                      start=datetime(2024, 5, 1 + k, 9, 0, tzinfo=tz))
            for k in range(5)
        ]
        driver_id = install_driver(store, 100 + i, trips, share_consent=False)
        if consent_state == "STUDY_ONLY":
            store.insert_consent(f"cons-s{i}", driver_id, "STUDY_ONLY")
        elif consent_state == "SHARE_WITH_ORG":
            store.insert_consent(f"cons-s{i}", driver_id, "SHARE_WITH_ORG")
        case = DeactivationCase(
            case_id=f"case-m{i}", driver_id=driver_id, platform=Platform.UBER,
            deactivation_date=date(2024, 6, 1), as_of_date=date(2024, 6, 15),
        )
        store.insert_case(case, created_by="fixture")
        drivers[consent_state] = (driver_id, case.case_id)

    roles = ["DRIVER", "FIELD_REP", "PARALEGAL", "ATTORNEY", "ADMIN"]
    probes = 0
    leaks = []
    for consent_state, (driver_id, case_id) in drivers.items():
        share_active = consent_state == "SHARE_WITH_ORG"
        endpoints = [
            ("trips", f"/drivers/{driver_id}/trips"),
            ("report.pdf", f"/cases/{case_id}/report.pdf"),
            ("report.csv", f"/cases/{case_id}/report.csv"),
            ("report.zip", f"/cases/{case_id}/report.zip"),
            ("preview", f"/cases/{case_id}/preview"),
        ]
        for role in roles:
            actor_id = driver_id if role == "DRIVER" else f"matrix-{role}"
            headers = {"X-Actor-Id": actor_id, "X-Actor-Role": role}
            for name, url in endpoints:
                response = client.get(url, headers=headers)
                probes += 1

                if role == "DRIVER":
                    expect = 200 if name == "trips" else 403
                    expect_code = None if name == "trips" else "FORBIDDEN"
                elif role == "FIELD_REP" and name != "trips":
                    expect, expect_code = 403, "FORBIDDEN"
                else:  # org data access: consent decides
                    expect = 200 if share_active else 403
                    expect_code = None if share_active else "CONSENT_REQUIRED"

                assert response.status_code == expect, (role, consent_state, name)
                if expect != 200:
                    body = response.json()
                    assert body["error"]["code"] == expect_code, (
                        role, consent_state, name, body,
                    )
                    if b"driver_pay" in response.content or b"$" in response.content:
                        leaks.append((role, consent_state, name))

    assert probes == 75
    assert leaks == []
    assert time.perf_counter() - start < 30.0


# ---- 7. Cross-format consistency -----------------------------------------


@criterion("format consistency: PDF text == JSON preview == CSV recomputation, 20 cases")
def test_format_consistency_20_cases():
    store, service = fixture_store()
    rng = random.Random(777)
    tz = timezone(timedelta(hours=-7))

    for i in range(20):
        deact = date(2024, 6, 1)
        n_days = rng.randrange(20, 100)
        trips = []
        for k in range(n_days):
            day = deact - timedelta(days=rng.randrange(1, 130))
            trips.append(
                make_trip(
                    trip_id=f"fc{i}-{k}",
                    start=datetime(day.year, day.month, day.day,
                                   rng.randrange(24), rng.randrange(60), tzinfo=tz),
                    driver_pay=rng.randrange(500, 9000),
                    customer_charge=rng.randrange(900, 14000),
                    tips=rng.randrange(0, 1500),
                    bonus=rng.randrange(0, 400),
                )
            )
        driver_id = install_driver(store, 200 + i, trips)
        created = service.create_case(
            ATTORNEY,
            driver_id=driver_id,
            platform=Platform.UBER,
            deactivation_date=deact,
            reactivation_date=deact + timedelta(days=rng.randrange(0, 40))
            if rng.random() < 0.5 else None,
            as_of_date=date(2024, 7, 15),
            params={"reference_days": rng.choice([84, 84, 30, 120]),
                    "interest_rate_bp": rng.choice([1200, 0, 850])},
        )
        case_id = created["case_id"]

        preview, _, _ = service.get_report(ATTORNEY, case_id,
                                           ReportFormat.JSON_PREVIEW)
        pdf_bytes, _, _ = service.get_report(ATTORNEY, case_id, ReportFormat.PDF)
        csv_bytes, _, _ = service.get_report(ATTORNEY, case_id, ReportFormat.CSV)

        labels = {}
        for line in extract_texts(pdf_bytes):
            if ": " in line:
                key, _, value = line.partition(": ")
                labels[key] = value
        assert parse_dollars(labels["Principal"]) == preview["principal_cents"]
        assert parse_dollars(labels["Interest"]) == preview["interest_cents"]
        assert parse_dollars(labels["Total"]) == preview["total_cents"]

        parsed = parse_csv(csv_bytes)
        case = store.get_case(case_id)
        recomputed = lost_wage(case, parsed)
        assert recomputed.principal == preview["principal_cents"]
        assert recomputed.interest == preview["interest_cents"]
        assert recomputed.total == preview["total_cents"]

        originals = store.trips_for_driver(driver_id, "UBER")
        assert [replace(t, account_id="csv-import") for t in originals] == parsed


# ---- 8. Report latency envelope ------------------------------------------


@criterion("report latency: 2,000-trip case renders in < 2 s")
def test_report_latency_2000_trips():
    store, service = fixture_store()
    rng = random.Random(4242)
    tz = timezone(timedelta(hours=-8))
    deact = date(2024, 6, 1)
    trips = []
    for k in range(2000):
        day = deact - timedelta(days=rng.randrange(1, 140))
        trips.append(
            make_trip(
                trip_id=f"lat-{k:05d}",
                start=datetime(day.year, day.month, day.day,
                               rng.randrange(24), rng.randrange(60), tzinfo=tz),
                driver_pay=rng.randrange(400, 9000),
                customer_charge=rng.randrange(900, 14000),
            )
        )
    driver_id = install_driver(store, 900, trips)
    created = service.create_case(
        ATTORNEY, driver_id=driver_id, platform=Platform.UBER,
        deactivation_date=deact, as_of_date=date(2024, 7, 15),
    )

    start = time.perf_counter()
    pdf_bytes, _, _ = service.get_report(ATTORNEY, created["case_id"],
                                         ReportFormat.PDF)
    elapsed = time.perf_counter() - start
    assert pdf_bytes.startswith(b"%PDF-1.7")
    assert elapsed < 2.0, f"report generation took {elapsed:.2f}s"
