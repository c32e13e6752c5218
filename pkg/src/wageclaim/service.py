"""Case-management operations: enrollment, consent, linking, cases, reports.

This is the module the HTTP layer and the CLI are both thin shells over.
Every operation takes the acting principal explicitly, enforces the role
matrix, and enforces the consent gate: no trip data or report bytes reach an
organization role without the driver's active share opt-in at call time.
"""

from __future__ import annotations

import json
import logging
import secrets
import threading
from dataclasses import dataclass
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable

from . import __version__ as ENGINE_VERSION
from .config import AppConfig
from .connector import PayrollConnector
from .engine import lost_wage, take_rate
from .ingest import (
    IngestResult,
    IngestStatus,
    SyncState,
    SyncStatus,
    UnknownAccountError,
    handle_webhook,
    sync_status,
)
from .models import DeactivationCase, InvalidParameterError, Platform, PolicyParams
from .reports import (
    ReportDocument,
    build_document,
    render_csv,
    render_pdf,
    render_preview,
    render_zip,
)
from .store import Store
from .wire import SIGNATURE_HEADER

logger = logging.getLogger(__name__)

OTP_MAX_ATTEMPTS = 5


class Role(str, Enum):
    DRIVER = "DRIVER"
    FIELD_REP = "FIELD_REP"
    PARALEGAL = "PARALEGAL"
    ATTORNEY = "ATTORNEY"
    ADMIN = "ADMIN"


ORG_ROLES = {Role.FIELD_REP, Role.PARALEGAL, Role.ATTORNEY, Role.ADMIN}
CASE_ROLES = {Role.PARALEGAL, Role.ATTORNEY, Role.ADMIN}
INTAKE_ROLES = {Role.DRIVER, Role.FIELD_REP, Role.ADMIN}


@dataclass(frozen=True)
class Actor:
    actor_id: str
    role: Role


class ConsentScope(str, Enum):
    STUDY_ONLY = "STUDY_ONLY"
    SHARE_WITH_ORG = "SHARE_WITH_ORG"


class ReportFormat(str, Enum):
    PDF = "PDF"
    CSV = "CSV"
    ZIP = "ZIP"
    JSON_PREVIEW = "JSON_PREVIEW"


# ---- errors ----


class ServiceError(Exception):
    code = "INTERNAL"
    http_status = 500

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ValidationFailure(ServiceError):
    code = "VALIDATION"
    http_status = 400


class NotFound(ServiceError):
    code = "NOT_FOUND"
    http_status = 404


class Conflict(ServiceError):
    code = "CONFLICT"
    http_status = 409


class Forbidden(ServiceError):
    code = "FORBIDDEN"
    http_status = 403


class ConsentRequired(ServiceError):
    code = "CONSENT_REQUIRED"
    http_status = 403


class SyncIncomplete(ServiceError):
    code = "SYNC_INCOMPLETE"
    http_status = 409


class OtpInvalid(ServiceError):
    code = "OTP_INVALID"
    http_status = 400


class OtpLocked(ServiceError):
    code = "OTP_LOCKED"
    http_status = 409


# ---- OTP delivery (pluggable; real SMS is out of scope) ----


class MemoryOtpChannel:
    """Default channel: records codes in memory and, optionally, a file."""

    def __init__(self, sink_path: str | Path | None = None):
        self.sink_path = Path(sink_path) if sink_path else None
        self.sent: list[tuple[str, str, str]] = []

    def deliver(self, driver_id: str, contact: str, code: str) -> None:
        self.sent.append((driver_id, contact, code))
        logger.info("OTP for %s -> %s", driver_id, contact)
        if self.sink_path:
            self.sink_path.parent.mkdir(parents=True, exist_ok=True)
            with self.sink_path.open("a", encoding="utf-8") as fh:
                fh.write(f"{driver_id}\t{contact}\t{code}\n")

    def last_code_for(self, driver_id: str) -> str | None:
        for did, _, code in reversed(self.sent):
            if did == driver_id:
                return code
        return None


class CaseService:
    """All case-service operations against one store."""

    def __init__(
        self,
        store: Store,
        config: AppConfig | None = None,
        connector: PayrollConnector | None = None,
        otp_channel: MemoryOtpChannel | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self.store = store
        self.config = config or AppConfig()
        self.connector = connector
        self.otp_channel = otp_channel or MemoryOtpChannel()
        self.clock = clock or (lambda: datetime.now(tz=timezone.utc))
        self._id_lock = threading.Lock()

    # ---- plumbing ----

    def _next_id(self, prefix: str, table: str) -> str:
        # Sequential ids keep seeded fixtures reproducible run to run.
        with self._id_lock:
            return f"{prefix}-{self.store.row_count(table) + 1:04d}"

    def webhook_transport(self):
        """In-process delivery target for a connector: feeds this service's
        own ingestion path, same contract as the HTTP endpoint."""

        def deliver(endpoint: str, body: bytes, headers: dict[str, str]) -> bool:
            result = self.receive_webhook(body, headers.get(SIGNATURE_HEADER, ""))
            return result.status in (IngestStatus.INSERTED, IngestStatus.DUPLICATE)

        return deliver

    @staticmethod
    def _require_role(actor: Actor, allowed: set[Role]) -> None:
        if actor.role not in allowed:
            raise Forbidden(f"role {actor.role.value} may not perform this operation")

    def _driver_or_404(self, driver_id: str):
        row = self.store.get_driver(driver_id)
        if row is None:
            raise NotFound(f"driver {driver_id} not found")
        return row

    def _share_active(self, driver_id: str) -> bool:
        return (
            self.store.active_consent(driver_id, ConsentScope.SHARE_WITH_ORG.value)
            is not None
        )

    def _require_share_consent(self, driver_id: str) -> None:
        if not self._share_active(driver_id):
            raise ConsentRequired(
                f"driver {driver_id} has not granted (or has revoked) data sharing"
                " with the organization"
            )

    # ---- enrollment and verification ----

    def enroll_driver(
        self, actor: Actor, contact: str, display_name: str,
        preferred_language: str | None = None,
    ) -> dict:
        self._require_role(actor, INTAKE_ROLES)
        contact = contact.strip()
        if not contact or not display_name.strip():
            raise ValidationFailure("contact and display_name are required")

        existing = self.store.get_driver_by_contact(contact)
        if existing is not None:
            challenge = self.store.active_challenge(existing["driver_id"])
            locked_out = challenge is not None and challenge["locked"]
            if existing["state"] == "VERIFIED" or (challenge and not locked_out):
                raise Conflict(f"contact already enrolled: {contact}")
            # Locked unverified enrollment: issue a fresh challenge.
            driver_id = existing["driver_id"]
        else:
            driver_id = self._next_id("drv", "drivers")
            self.store.insert_driver(driver_id, contact, display_name.strip(),
                                     preferred_language)

        challenge_id = self._next_id("otp", "otp_challenges")
        code = f"{secrets.randbelow(10**6):06d}"
        self.store.create_challenge(challenge_id, driver_id, code)
        self.otp_channel.deliver(driver_id, contact, code)
        return {"driver_id": driver_id, "otp_challenge": challenge_id}

    def verify_driver(self, actor: Actor, driver_id: str, code: str) -> dict:
        self._require_role(actor, INTAKE_ROLES)
        driver = self._driver_or_404(driver_id)
        challenge = self.store.active_challenge(driver_id)
        if challenge is None:
            raise ValidationFailure("no verification challenge outstanding")
        if challenge["locked"]:
            raise OtpLocked("challenge locked after repeated failures;"
                            " enroll again to receive a new code")
        if challenge["verified_at"]:
            return {"driver_id": driver_id, "state": driver["state"]}
        if code != challenge["code"]:
            attempts = challenge["attempts"] + 1
            self.store.bump_challenge_attempts(
                challenge["challenge_id"], locked=attempts >= OTP_MAX_ATTEMPTS
            )
            if attempts >= OTP_MAX_ATTEMPTS:
                raise OtpLocked("challenge locked after repeated failures;"
                                " enroll again to receive a new code")
            raise OtpInvalid("incorrect verification code")

        self.store.mark_challenge_verified(challenge["challenge_id"])
        self.store.set_driver_state(driver_id, "VERIFIED")
        if self.config.consent_mode == "OPT_OUT":
            # Organizer-preferred default-share mode: consent is granted at
            # verification and remains revocable like any explicit grant.
            self._grant(driver_id, ConsentScope.SHARE_WITH_ORG)
        return {"driver_id": driver_id, "state": "VERIFIED"}

    # ---- consent ----

    def _grant(self, driver_id: str, scope: ConsentScope) -> dict:
        active = self.store.active_consent(driver_id, scope.value)
        if active is not None:
            return self._consent_dict(active)
        consent_id = self._next_id("cons", "consents")
        self.store.insert_consent(consent_id, driver_id, scope.value)
        return self._consent_dict(self.store.get_consent(consent_id))

    def grant_consent(self, actor: Actor, driver_id: str, scope: ConsentScope) -> dict:
        self._require_role(actor, INTAKE_ROLES)
        if actor.role is Role.DRIVER and actor.actor_id != driver_id:
            raise Forbidden("drivers may only manage their own consent")
        driver = self._driver_or_404(driver_id)
        if driver["state"] != "VERIFIED":
            raise ValidationFailure("driver must verify before granting consent")
        return self._grant(driver_id, scope)

    def revoke_consent(self, actor: Actor, consent_id: str) -> dict:
        self._require_role(actor, INTAKE_ROLES)
        row = self.store.get_consent(consent_id)
        if row is None:
            raise NotFound(f"consent {consent_id} not found")
        if actor.role is Role.DRIVER and actor.actor_id != row["driver_id"]:
            raise Forbidden("drivers may only manage their own consent")
        if row["revoked_at"] is None:
            self.store.revoke_consent(consent_id)
            row = self.store.get_consent(consent_id)
        return self._consent_dict(row)

    @staticmethod
    def _consent_dict(row) -> dict:
        return {
            "consent_id": row["consent_id"],
            "driver_id": row["driver_id"],
            "scope": row["scope"],
            "granted_at": row["granted_at"],
            "revoked_at": row["revoked_at"],
        }

    def consents_for_driver(self, actor: Actor, driver_id: str) -> list[dict]:
        if actor.role is Role.DRIVER and actor.actor_id != driver_id:
            raise Forbidden("drivers may only view their own consent history")
        self._driver_or_404(driver_id)
        return [self._consent_dict(r) for r in self.store.consents_for_driver(driver_id)]

    # ---- account linking and sync ----

    def link_account(
        self, actor: Actor, driver_id: str, platform: Platform,
        connector_account_id: str,
    ) -> dict:
        self._require_role(actor, INTAKE_ROLES)
        if actor.role is Role.DRIVER and actor.actor_id != driver_id:
            raise Forbidden("drivers may only link their own accounts")
        driver = self._driver_or_404(driver_id)
        if driver["state"] != "VERIFIED":
            raise ValidationFailure("driver must verify before linking accounts")
        if self.store.active_consent(driver_id, ConsentScope.STUDY_ONLY.value) is None \
                and not self._share_active(driver_id):
            raise ConsentRequired("participation consent must precede account linking")
        if self.store.get_account(connector_account_id) is not None:
            raise Conflict(f"account {connector_account_id} already linked")

        self.store.insert_account(connector_account_id, driver_id, platform.value)
        detail: dict = {"account_id": connector_account_id, "state": "PENDING"}
        if self.connector is not None:
            try:
                result = self.connector.link_account(
                    connector_account_id, self.config.connector_endpoint
                )
            except KeyError as exc:
                raise NotFound(f"connector knows no account {exc.args[0]}") from exc
            detail["deliveries"] = len(result.deliveries)
            detail["state"] = sync_status(self.store, connector_account_id).state.value
        return detail

    def receive_webhook(self, raw_body: bytes, signature: str) -> IngestResult:
        return handle_webhook(self.store, self.config.webhook_secret, raw_body, signature)

    def account_status(self, actor: Actor, account_id: str) -> dict:
        row = self.store.get_account(account_id)
        if row is None:
            raise NotFound(f"account {account_id} not found")
        is_own = actor.role is Role.DRIVER and actor.actor_id == row["driver_id"]
        if not is_own:
            self._require_role(actor, ORG_ROLES)
        status = sync_status(self.store, account_id)
        out = {
            "account_id": account_id,
            "driver_id": row["driver_id"],
            "platform": row["platform"],
            "state": status.state.value,
            "last_event_at": status.last_event_at,
            "trips_ingested": status.trips_ingested,
            "last_error": status.last_error,
        }
        # The driver's post-signup "reward": platform take rate, shown once
        # data has synced. Org roles see it only behind the consent gate.
        can_see_rate = is_own or (
            actor.role in ORG_ROLES and self._share_active(row["driver_id"])
        )
        if can_see_rate and status.state is SyncState.SYNCED:
            rate = take_rate(self.store.trips_for_account(account_id))
            out["take_rate"] = None if rate.value is None else float(rate.value)
            out["take_rate_display"] = (
                None if rate.value is None else f"{float(rate.value) * 100:.1f}%"
            )
            out["take_rate_clamped"] = rate.clamped
        return out

    def list_drivers(self, actor: Actor, synced: bool | None = None) -> list[dict]:
        self._require_role(actor, ORG_ROLES)
        out = []
        for row in self.store.list_drivers():
            accounts = self.store.accounts_for_driver(row["driver_id"])
            states = [a["state"] for a in accounts]
            any_synced = SyncState.SYNCED.value in states
            if synced is True and not any_synced:
                continue
            if synced is False and (not states or any_synced):
                continue
            out.append(
                {
                    "driver_id": row["driver_id"],
                    "display_name": row["display_name"],
                    "contact": row["contact"],
                    "state": row["state"],
                    "share_consent_active": self._share_active(row["driver_id"]),
                    "accounts": [
                        {
                            "account_id": a["account_id"],
                            "platform": a["platform"],
                            "state": a["state"],
                            "trips_ingested": a["trips_ingested"],
                        }
                        for a in accounts
                    ],
                }
            )
        return out

    def driver_trips(self, actor: Actor, driver_id: str) -> list[dict]:
        """Raw trip records; the consent gate applies to org roles."""
        self._driver_or_404(driver_id)
        if actor.role is Role.DRIVER:
            if actor.actor_id != driver_id:
                raise Forbidden("drivers may only view their own trips")
        else:
            self._require_role(actor, ORG_ROLES)
            self._require_share_consent(driver_id)
        from .wire import trip_to_json

        return [trip_to_json(t) for t in self.store.trips_for_driver(driver_id)]

    # ---- cases ----

    def _default_params(self) -> dict:
        stored = self.store.get_policy_defaults()
        return {
            "reference_days": int(stored.get("reference_days", 84)),
            "interest_rate_bp": int(stored.get("interest_rate_bp", 1200)),
            "fallback_daily": int(stored.get("fallback_daily", 20000)),
            "interest_day_count": int(stored.get("interest_day_count", 365)),
            "case_timezone": stored.get("case_timezone", self.config.default_timezone),
            "include_tips": stored.get("include_tips", "true") == "true",
        }

    def set_policy_default(self, actor: Actor, key: str, value: str) -> dict:
        self._require_role(actor, {Role.ADMIN})
        allowed = set(self._default_params())
        if key not in allowed:
            raise ValidationFailure(f"unknown policy default {key!r}")
        self.store.set_policy_default(key, value)
        return self._default_params()

    def policy_defaults(self, actor: Actor) -> dict:
        self._require_role(actor, ORG_ROLES)
        return self._default_params()

    def create_case(
        self,
        actor: Actor,
        driver_id: str,
        platform: Platform,
        deactivation_date: date,
        reactivation_date: date | None = None,
        as_of_date: date | None = None,
        params: dict | None = None,
        use_fallback: bool = False,
    ) -> dict:
        self._require_role(actor, CASE_ROLES)
        self._driver_or_404(driver_id)
        self._require_share_consent(driver_id)

        merged = self._default_params()
        merged.update(params or {})
        try:
            policy = PolicyParams(**merged)
            if as_of_date is None:
                as_of_date = self.clock().astimezone(policy.tzinfo()).date()
            case = DeactivationCase(
                case_id=self._next_id("case", "cases"),
                driver_id=driver_id,
                platform=platform,
                deactivation_date=deactivation_date,
                reactivation_date=reactivation_date,
                as_of_date=as_of_date,
                params=policy,
                use_fallback=use_fallback,
            )
        except (InvalidParameterError, TypeError) as exc:
            raise ValidationFailure(str(exc)) from exc

        self.store.insert_case(case, created_by=actor.actor_id)
        self.store.append_audit(actor.actor_id, actor.role.value, "case_created",
                                case.case_id)
        return self.case_dict(case)

    @staticmethod
    def case_dict(case: DeactivationCase) -> dict:
        return {
            "case_id": case.case_id,
            "driver_id": case.driver_id,
            "platform": case.platform.value,
            "deactivation_date": case.deactivation_date.isoformat(),
            "reactivation_date": (
                case.reactivation_date.isoformat() if case.reactivation_date else None
            ),
            "as_of_date": case.as_of_date.isoformat(),
            "use_fallback": case.use_fallback,
            "params": {
                "reference_days": case.params.reference_days,
                "interest_rate_bp": case.params.interest_rate_bp,
                "fallback_daily": case.params.fallback_daily,
                "interest_day_count": case.params.interest_day_count,
                "case_timezone": case.params.case_timezone,
                "include_tips": case.params.include_tips,
            },
        }

    def list_cases(self, actor: Actor) -> list[dict]:
        self._require_role(actor, CASE_ROLES)
        return [self.case_dict(self.store.get_case(r["case_id"]))
                for r in self.store.list_cases()]

    # ---- reports ----

    def sync_flags(self, case: DeactivationCase) -> tuple[bool, bool]:
        """(fully_synced, sync_failed) for the case's platform accounts.

        sync_failed is the fallback trigger: nothing synced and at least one
        account reported FAILED.
        """
        states = [
            a["state"]
            for a in self.store.accounts_for_driver(case.driver_id, case.platform.value)
        ]
        fully_synced = bool(states) and all(s == SyncState.SYNCED.value for s in states)
        sync_failed = (
            bool(states)
            and not any(s == SyncState.SYNCED.value for s in states)
            and any(s == SyncState.FAILED.value for s in states)
        )
        return fully_synced, sync_failed

    def get_report(
        self,
        actor: Actor,
        case_id: str,
        fmt: ReportFormat,
        override_sync: bool = False,
        redact: bool = False,
    ):
        """Compute and render a report; returns (payload, media_type, filename).

        JSON_PREVIEW returns (dict, "application/json", None). Every
        successful generation appends an audit entry.
        """
        case = self.store.get_case(case_id)
        if case is None:
            raise NotFound(f"case {case_id} not found")

        if actor.role is Role.DRIVER:
            if not self.config.driver_report_access or actor.actor_id != case.driver_id:
                raise Forbidden("report access is limited to the legal team")
        else:
            self._require_role(actor, CASE_ROLES)
        self._require_share_consent(case.driver_id)

        fully_synced, sync_failed = self.sync_flags(case)
        if not fully_synced and not (case.use_fallback or override_sync):
            raise SyncIncomplete(
                "account sync is incomplete for this driver/platform;"
                " enable the fallback rate or acknowledge partial data"
            )

        trips = self.store.trips_for_driver(case.driver_id, case.platform.value)
        estimate = lost_wage(case, trips, sync_failed=sync_failed)
        driver = self.store.get_driver(case.driver_id)
        doc = build_document(
            case=case,
            driver_name=driver["display_name"],
            driver_contact=driver["contact"],
            estimate=estimate,
            generated_at=self.clock(),
            engine_version=ENGINE_VERSION,
            redact=redact,
        )

        detail = json.dumps(
            {"format": fmt.value, "override_sync": override_sync, "redact": redact,
             "engine_version": ENGINE_VERSION},
            sort_keys=True,
        )
        if fmt is ReportFormat.JSON_PREVIEW:
            payload: object = render_preview(doc)
            media, filename = "application/json", None
        elif fmt is ReportFormat.PDF:
            payload = render_pdf(doc)
            media, filename = "application/pdf", f"{case_id}-report.pdf"
        elif fmt is ReportFormat.CSV:
            payload = render_csv(trips)
            media, filename = "text/csv", f"{case_id}-trips.csv"
        else:
            payload = render_zip(doc, trips)
            media, filename = "application/zip", f"{case_id}-bundle.zip"

        self.store.append_audit(
            actor.actor_id, actor.role.value, "report_generated", case_id, detail
        )
        return payload, media, filename

    # ---- operational views ----

    def audit_entries(self, actor: Actor) -> list[dict]:
        self._require_role(actor, {Role.ADMIN})
        return [
            {
                "id": r["id"],
                "at": r["at"],
                "actor_id": r["actor_id"],
                "actor_role": r["actor_role"],
                "action": r["action"],
                "case_id": r["case_id"],
                "detail": r["detail"],
            }
            for r in self.store.audit_entries()
        ]

    def dead_letters(self, actor: Actor) -> list[dict]:
        self._require_role(actor, {Role.ADMIN})
        return [
            {
                "id": r["id"],
                "received_at": r["received_at"],
                "reason": r["reason"],
                "body_bytes": len(r["raw_body"]),
            }
            for r in self.store.list_dead_letters()
        ]

    def stats(self, actor: Actor) -> dict:
        self._require_role(actor, ORG_ROLES)
        return self.store.stats()
