"""REST surface over CaseService.

JSON in/out, RFC 3339 timestamps, and one actor per call carried in the
X-Actor-Id / X-Actor-Role headers (authentication itself is out of scope).
The webhook endpoint is the exception: it authenticates by HMAC signature.
"""

from __future__ import annotations

from datetime import date
from pathlib import Path

from fastapi import Depends, FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .ingest import IngestStatus
from .models import InvalidParameterError, Platform
from .service import (
    Actor,
    CaseService,
    ConsentScope,
    ReportFormat,
    Role,
    ServiceError,
    ValidationFailure,
)
from .wire import SIGNATURE_HEADER


class EnrollBody(BaseModel):
    contact: str
    display_name: str
    preferred_language: str | None = None


class VerifyBody(BaseModel):
    code: str


class ConsentBody(BaseModel):
    scope: ConsentScope


class LinkAccountBody(BaseModel):
    platform: Platform
    connector_account_id: str


class CaseParamsBody(BaseModel):
    reference_days: int | None = None
    interest_rate_bp: int | None = None
    fallback_daily: int | None = None
    interest_day_count: int | None = None
    case_timezone: str | None = None
    include_tips: bool | None = None


class CreateCaseBody(BaseModel):
    driver_id: str
    platform: Platform
    deactivation_date: date
    reactivation_date: date | None = None
    as_of_date: date | None = None
    use_fallback: bool = False
    params: CaseParamsBody | None = None


class PolicyDefaultBody(BaseModel):
    key: str
    value: str


def current_actor(
    x_actor_id: str | None = Header(default=None),
    x_actor_role: str | None = Header(default=None),
) -> Actor:
    if not x_actor_id or not x_actor_role:
        raise ValidationFailure("X-Actor-Id and X-Actor-Role headers are required")
    try:
        role = Role(x_actor_role)
    except ValueError:
        raise ValidationFailure(f"unknown role {x_actor_role!r}")
    return Actor(actor_id=x_actor_id, role=role)


def create_app(service: CaseService, frontend_dir: str | Path | None = None) -> FastAPI:
    from . import __version__

    app = FastAPI(title="wageclaim", version=__version__)

    @app.exception_handler(ServiceError)
    async def service_error(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(InvalidParameterError)
    async def invalid_param(request: Request, exc: InvalidParameterError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "VALIDATION", "message": str(exc)}},
        )

    # ---- intake ----

    @app.post("/drivers", status_code=201)
    def enroll(body: EnrollBody, actor: Actor = Depends(current_actor)):
        return service.enroll_driver(
            actor, body.contact, body.display_name, body.preferred_language
        )

    @app.post("/drivers/{driver_id}/verify")
    def verify(driver_id: str, body: VerifyBody, actor: Actor = Depends(current_actor)):
        return service.verify_driver(actor, driver_id, body.code)

    @app.post("/drivers/{driver_id}/consent", status_code=201)
    def grant_consent(
        driver_id: str, body: ConsentBody, actor: Actor = Depends(current_actor)
    ):
        return service.grant_consent(actor, driver_id, body.scope)

    @app.delete("/consents/{consent_id}")
    def revoke_consent(consent_id: str, actor: Actor = Depends(current_actor)):
        return service.revoke_consent(actor, consent_id)

    @app.get("/drivers/{driver_id}/consents")
    def consent_history(driver_id: str, actor: Actor = Depends(current_actor)):
        return service.consents_for_driver(actor, driver_id)

    @app.post("/drivers/{driver_id}/accounts", status_code=201)
    def link_account(
        driver_id: str, body: LinkAccountBody, actor: Actor = Depends(current_actor)
    ):
        return service.link_account(
            actor, driver_id, body.platform, body.connector_account_id
        )

    # ---- webhook ingestion (signature-authenticated, hostile input allowed) ----

    @app.post("/webhooks/connector")
    async def connector_webhook(request: Request):
        raw = await request.body()
        signature = request.headers.get(SIGNATURE_HEADER, "")
        result = service.receive_webhook(raw, signature)
        status_map = {
            IngestStatus.INSERTED: 200,
            IngestStatus.DUPLICATE: 200,
            IngestStatus.REJECTED_SIGNATURE: 401,
            IngestStatus.REJECTED_MALFORMED: 400,
        }
        return JSONResponse(
            status_code=status_map[result.status],
            content={
                "status": result.status.value,
                "trips_inserted": result.trips_inserted,
                "account_id": result.account_id,
                "detail": result.detail,
            },
        )

    # ---- org views ----

    @app.get("/drivers")
    def list_drivers(
        synced: bool | None = None, actor: Actor = Depends(current_actor)
    ):
        return service.list_drivers(actor, synced)

    @app.get("/drivers/{driver_id}/trips")
    def driver_trips(driver_id: str, actor: Actor = Depends(current_actor)):
        return service.driver_trips(actor, driver_id)

    @app.get("/accounts/{account_id}/status")
    def account_status(account_id: str, actor: Actor = Depends(current_actor)):
        return service.account_status(actor, account_id)

    @app.get("/stats")
    def stats(actor: Actor = Depends(current_actor)):
        return service.stats(actor)

    @app.get("/audit")
    def audit(actor: Actor = Depends(current_actor)):
        return service.audit_entries(actor)

    @app.get("/dead-letters")
    def dead_letters(actor: Actor = Depends(current_actor)):
        return service.dead_letters(actor)

    @app.get("/policy-defaults")
    def get_policy_defaults(actor: Actor = Depends(current_actor)):
        return service.policy_defaults(actor)

    @app.put("/policy-defaults")
    def put_policy_default(
        body: PolicyDefaultBody, actor: Actor = Depends(current_actor)
    ):
        return service.set_policy_default(actor, body.key, body.value)

    # ---- cases and reports ----

    @app.post("/cases", status_code=201)
    def create_case(body: CreateCaseBody, actor: Actor = Depends(current_actor)):
        params = (
            {k: v for k, v in body.params.model_dump().items() if v is not None}
            if body.params
            else None
        )
        return service.create_case(
            actor,
            driver_id=body.driver_id,
            platform=body.platform,
            deactivation_date=body.deactivation_date,
            reactivation_date=body.reactivation_date,
            as_of_date=body.as_of_date,
            params=params,
            use_fallback=body.use_fallback,
        )

    @app.get("/cases")
    def list_cases(actor: Actor = Depends(current_actor)):
        return service.list_cases(actor)

    def _binary_report(
        case_id: str, fmt: ReportFormat, actor: Actor,
        override_sync: bool, redact: bool,
    ) -> Response:
        payload, media, filename = service.get_report(
            actor, case_id, fmt, override_sync=override_sync, redact=redact
        )
        headers = {}
        if filename:
            headers["Content-Disposition"] = f'attachment; filename="{filename}"'
        return Response(content=payload, media_type=media, headers=headers)

    @app.get("/cases/{case_id}/report.pdf")
    def report_pdf(
        case_id: str, override_sync: bool = False, redact: bool = False,
        actor: Actor = Depends(current_actor),
    ):
        return _binary_report(case_id, ReportFormat.PDF, actor, override_sync, redact)

    @app.get("/cases/{case_id}/report.csv")
    def report_csv(
        case_id: str, override_sync: bool = False, redact: bool = False,
        actor: Actor = Depends(current_actor),
    ):
        return _binary_report(case_id, ReportFormat.CSV, actor, override_sync, redact)

    @app.get("/cases/{case_id}/report.zip")
    def report_zip(
        case_id: str, override_sync: bool = False, redact: bool = False,
        actor: Actor = Depends(current_actor),
    ):
        return _binary_report(case_id, ReportFormat.ZIP, actor, override_sync, redact)

    @app.get("/cases/{case_id}/preview")
    def report_preview(
        case_id: str, override_sync: bool = False, redact: bool = False,
        actor: Actor = Depends(current_actor),
    ):
        payload, _, _ = service.get_report(
            actor, case_id, ReportFormat.JSON_PREVIEW,
            override_sync=override_sync, redact=redact,
        )
        return payload

    if frontend_dir and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
