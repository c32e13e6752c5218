"""Operator command line: seed scenarios, generate reports headlessly, run
the brute-force verification, and dump deployment-style statistics.

Every command is a thin shell over CaseService / PayrollConnector
operations. Exit codes are scriptable: 0 success, 2 validation, 3 consent or
authorization, 4 sync incomplete, 5 internal (including verification
mismatches).
"""

from __future__ import annotations

import json
import random
import sys
from fractions import Fraction
from pathlib import Path

import click

from .config import AppConfig, load_config
from .connector import PayrollConnector, ScenarioConfig
from .engine import lost_wage
from .models import InvalidParameterError, Platform
from .money import round_half_even
from .oracle import brute_force_estimate
from .service import (
    Actor,
    CaseService,
    ConsentRequired,
    ConsentScope,
    Forbidden,
    MemoryOtpChannel,
    ReportFormat,
    Role,
    ServiceError,
    SyncIncomplete,
)
from .store import Store

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_AUTH = 3
EXIT_SYNC = 4
EXIT_INTERNAL = 5

OPERATOR = Actor("cli-operator", Role.ADMIN)
LEGAL = Actor("cli-legal", Role.ATTORNEY)
FIELD = Actor("cli-field", Role.FIELD_REP)

_FORMATS = {
    "pdf": ReportFormat.PDF,
    "csv": ReportFormat.CSV,
    "zip": ReportFormat.ZIP,
    "json": ReportFormat.JSON_PREVIEW,
}


def _exit_code(exc: ServiceError) -> int:
    if isinstance(exc, (ConsentRequired, Forbidden)):
        return EXIT_AUTH
    if isinstance(exc, SyncIncomplete):
        return EXIT_SYNC
    if exc.code == "INTERNAL":
        return EXIT_INTERNAL
    return EXIT_VALIDATION


def _fail(as_json: bool, code: str, message: str, exit_code: int) -> None:
    if as_json:
        click.echo(json.dumps({"error": {"code": code, "message": message}}))
    else:
        click.echo(f"ERROR {code}: {message}", err=True)
    sys.exit(exit_code)


class Runtime:
    """Config-driven wiring shared by all commands."""

    def __init__(self, config_path: str | None):
        self.config: AppConfig = load_config(config_path)
        self.store = Store(self.config.database)
        self.service = CaseService(
            self.store,
            self.config,
            otp_channel=MemoryOtpChannel(self.config.otp_sink_path),
        )
        self.connector = PayrollConnector(
            secret=self.config.webhook_secret,
            transport=self.service.webhook_transport(),
            batch_size=self.config.connector_batch_size,
            latency_range=self.config.latency_range_seconds,
        )
        self.service.connector = self.connector
        state = Path(self.config.connector_state_path)
        if state.exists():
            self.connector.load_state(state)


@click.group()
@click.option(
    "--config", "-c", "config_path", type=click.Path(), default=None,
    help="INI config path (or set WAGECLAIM_CONFIG).",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Lost-wage claims toolkit."""
    ctx.obj = config_path


@main.command()
@click.argument("scenario_path", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_obj
def seed(config_path: str | None, scenario_path: str, as_json: bool) -> None:
    """Generate connector accounts from a scenario file and replay the full
    intake: enroll, verify, consent, link, ingest, and create fixture cases."""
    if not Path(scenario_path).exists():
        _fail(as_json, "VALIDATION", f"scenario file not found: {scenario_path}",
              EXIT_VALIDATION)
    try:
        scenario = ScenarioConfig.from_json_file(scenario_path)
    except (InvalidParameterError, ValueError, KeyError, TypeError) as exc:
        _fail(as_json, "VALIDATION", f"bad scenario: {exc}", EXIT_VALIDATION)

    rt = Runtime(config_path)
    accounts = rt.connector.seed(scenario)

    decline_count = round_half_even(
        Fraction(scenario.decline_share_rate).limit_denominator(10**9) * len(accounts)
    )
    declined = set(
        random.Random(scenario.seed ^ 0xD5).sample(range(len(accounts)), decline_count)
    )

    driver_ids: list[str] = []
    try:
        for idx, account in enumerate(accounts):
            enrollment = rt.service.enroll_driver(
                FIELD, account.credential_hint, f"Driver {idx:04d}"
            )
            driver_id = enrollment["driver_id"]
            driver_ids.append(driver_id)
            code = rt.service.otp_channel.last_code_for(driver_id)
            rt.service.verify_driver(FIELD, driver_id, code or "")
            rt.service.grant_consent(FIELD, driver_id, ConsentScope.STUDY_ONLY)
            if idx not in declined and rt.config.consent_mode == "OPT_IN":
                rt.service.grant_consent(FIELD, driver_id, ConsentScope.SHARE_WITH_ORG)
            rt.service.link_account(
                FIELD, driver_id, account.platform, account.connector_account_id
            )

        case_ids = []
        for fixture in scenario.cases:
            if not 0 <= fixture.driver_index < len(driver_ids):
                raise InvalidParameterError(
                    f"case driver_index {fixture.driver_index} out of range"
                )
            params = {
                k: v
                for k, v in (
                    ("reference_days", fixture.reference_days),
                    ("interest_rate_bp", fixture.interest_rate_bp),
                    ("fallback_daily", fixture.fallback_daily),
                )
                if v is not None
            }
            created = rt.service.create_case(
                LEGAL,
                driver_id=driver_ids[fixture.driver_index],
                platform=accounts[fixture.driver_index].platform,
                deactivation_date=fixture.deactivation_date,
                reactivation_date=fixture.reactivation_date,
                as_of_date=fixture.as_of_date,
                params=params or None,
                use_fallback=fixture.use_fallback,
            )
            case_ids.append(created["case_id"])
    except ServiceError as exc:
        _fail(as_json, exc.code, exc.message, _exit_code(exc))
    except InvalidParameterError as exc:
        _fail(as_json, "VALIDATION", str(exc), EXIT_VALIDATION)

    rt.connector.save_state(rt.config.connector_state_path)
    summary = {
        "accounts": len(accounts),
        "drivers": len(driver_ids),
        "cases": case_ids,
        "declined_share": sorted(declined),
        "stats": rt.store.stats(),
        "content_hash": rt.store.content_hash(),
    }
    if as_json:
        click.echo(json.dumps(summary, indent=2))
    else:
        stats = summary["stats"]
        click.echo(f"seeded {summary['accounts']} connector accounts")
        click.echo(f"accounts by state: {stats['accounts_by_state']}")
        click.echo(f"accounts by platform: {stats['accounts_by_platform']}")
        if case_ids:
            click.echo(f"cases created: {', '.join(case_ids)}")
        click.echo(f"store content hash: {summary['content_hash']}")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("case_id")
@click.option("--format", "fmt", type=click.Choice(sorted(_FORMATS)), default="pdf")
@click.option("--out", type=click.Path(), default=None, help="Output file path.")
@click.option("--redact", is_flag=True, help="Strip driver PII from the report.")
@click.option("--override-sync", is_flag=True,
              help="Generate despite incomplete sync (recorded in the audit log).")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def report(config_path, case_id, fmt, out, redact, override_sync, as_json) -> None:
    """Headless report generation for one case."""
    rt = Runtime(config_path)
    try:
        payload, _, filename = rt.service.get_report(
            LEGAL, case_id, _FORMATS[fmt],
            override_sync=override_sync, redact=redact,
        )
    except ServiceError as exc:
        _fail(as_json, exc.code, exc.message, _exit_code(exc))

    if fmt == "json":
        text = json.dumps(payload, indent=2)
        if out:
            Path(out).write_text(text + "\n", encoding="utf-8")
            if not as_json:
                click.echo(f"wrote {out}")
            else:
                click.echo(json.dumps({"case_id": case_id, "out": out}))
        else:
            click.echo(text)
        sys.exit(EXIT_OK)

    out = out or filename
    Path(out).write_bytes(payload)
    if as_json:
        click.echo(json.dumps(
            {"case_id": case_id, "format": fmt, "out": str(out),
             "bytes": len(payload)}
        ))
    else:
        click.echo(f"wrote {out} ({len(payload)} bytes)")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("case_id")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def oracle(config_path, case_id, as_json) -> None:
    """Recompute a case with the independent day-by-day loop and diff it
    against the engine, exact to the cent."""
    rt = Runtime(config_path)
    case = rt.store.get_case(case_id)
    if case is None:
        _fail(as_json, "NOT_FOUND", f"case {case_id} not found", EXIT_VALIDATION)

    trips = rt.store.trips_for_driver(case.driver_id, case.platform.value)
    _, sync_failed = rt.service.sync_flags(case)
    engine = lost_wage(case, trips, sync_failed=sync_failed)
    check = brute_force_estimate(case, trips, sync_failed=sync_failed)

    # Conservation check: ingest counters vs a direct recount, so rows
    # tampered with or deleted behind the pipeline's back surface here.
    counters = recount = 0
    for acct in rt.store.accounts_for_driver(case.driver_id, case.platform.value):
        counters += acct["trips_ingested"]
        recount += rt.store.trip_count(acct["account_id"])

    fields = {
        "window_total": (engine.window.window_total, check.window_total),
        "deactivation_days": (engine.deactivation_days, check.deactivation_days),
        "principal": (engine.principal, check.principal),
        "interest": (engine.interest, check.interest),
        "total": (engine.total, check.total),
        "fallback_used": (engine.fallback_used, check.fallback_used),
        "trips_ingested": (counters, recount),
    }
    diffs = {k: v for k, v in fields.items() if v[0] != v[1]}
    result = {
        "case_id": case_id,
        "match": not diffs,
        "engine": {k: v[0] for k, v in fields.items()},
        "oracle": {k: v[1] for k, v in fields.items()},
    }
    if as_json:
        click.echo(json.dumps(result, indent=2))
    elif diffs:
        click.echo(f"MISMATCH on {case_id}:")
        for key, (got, expected) in diffs.items():
            click.echo(f"  {key}: engine={got} oracle={expected}")
    else:
        click.echo(f"MATCH: engine and brute-force agree on {case_id}")
    sys.exit(EXIT_OK if not diffs else EXIT_INTERNAL)


@main.command()
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def stats(config_path, as_json) -> None:
    """Account / sync / case counts, per platform."""
    rt = Runtime(config_path)
    data = rt.store.stats()
    if as_json:
        click.echo(json.dumps(data, indent=2))
        sys.exit(EXIT_OK)
    by_state = data["accounts_by_state"]
    click.echo(f"accounts created: {data['accounts_created']}")
    click.echo(f"  synced: {by_state.get('SYNCED', 0)}")
    click.echo(f"  failed: {by_state.get('FAILED', 0)}")
    click.echo(f"  other:  "
               f"{data['accounts_created'] - by_state.get('SYNCED', 0) - by_state.get('FAILED', 0)}")
    for platform in sorted(data["accounts_by_platform"]):
        synced = data["synced_by_platform"].get(platform, 0)
        click.echo(f"{platform}: {data['accounts_by_platform'][platform]} accounts,"
                   f" {synced} synced")
    click.echo(f"drivers: {data['drivers']}  trips: {data['trips']}"
               f"  cases: {data['cases']}  dead letters: {data['dead_letters']}")
    sys.exit(EXIT_OK)


@main.command("dead-letters")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def dead_letters(config_path, as_json) -> None:
    """List quarantined webhook deliveries awaiting operator review."""
    rt = Runtime(config_path)
    letters = rt.service.dead_letters(OPERATOR)
    if as_json:
        click.echo(json.dumps(letters, indent=2))
    elif not letters:
        click.echo("no dead letters")
    else:
        for entry in letters:
            click.echo(
                f"#{entry['id']} {entry['received_at']} {entry['reason']}"
                f" ({entry['body_bytes']} bytes)"
            )
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8700, type=int)
@click.option("--ui", "ui_dir", type=click.Path(), default="frontend/dist",
              help="Static assets directory for the browser app.")
@click.pass_obj
def serve(config_path, host, port, ui_dir) -> None:
    """Run the HTTP case service (serves the browser app when built)."""
    import uvicorn

    from .api import create_app

    rt = Runtime(config_path)
    app = create_app(rt.service, frontend_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
