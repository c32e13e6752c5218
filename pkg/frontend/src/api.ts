// Typed client for the case-service REST API. Every call carries exactly
// one actor via the X-Actor-Id / X-Actor-Role headers; errors arrive as
// {"error": {"code", "message"}} and surface as ServiceApiError.

export type Role = 'DRIVER' | 'FIELD_REP' | 'PARALEGAL' | 'ATTORNEY' | 'ADMIN';
export type Platform = 'UBER' | 'LYFT';
export type ConsentScope = 'STUDY_ONLY' | 'SHARE_WITH_ORG';

export interface Actor {
  actorId: string;
  role: Role;
}

export interface EnrollResult {
  driver_id: string;
  otp_challenge: string;
}

export interface ConsentRecord {
  consent_id: string;
  driver_id: string;
  scope: ConsentScope;
  granted_at: string;
  revoked_at: string | null;
}

export interface AccountSummary {
  account_id: string;
  platform: Platform;
  state: 'PENDING' | 'SYNCING' | 'SYNCED' | 'FAILED';
  trips_ingested: number;
}

export interface DriverRow {
  driver_id: string;
  display_name: string;
  contact: string;
  state: string;
  share_consent_active: boolean;
  accounts: AccountSummary[];
}

export interface AccountStatus {
  account_id: string;
  driver_id: string;
  platform: Platform;
  state: AccountSummary['state'];
  last_event_at: string | null;
  trips_ingested: number;
  last_error: string | null;
  take_rate?: number | null;
  take_rate_display?: string | null;
}

export interface PolicyDefaults {
  reference_days: number;
  interest_rate_bp: number;
  fallback_daily: number;
  interest_day_count: number;
  case_timezone: string;
  include_tips: boolean;
}

export interface CreateCaseRequest {
  driver_id: string;
  platform: Platform;
  deactivation_date: string;
  reactivation_date?: string | null;
  as_of_date?: string | null;
  use_fallback?: boolean;
  params?: Partial<PolicyDefaults>;
}

export interface CaseRecord {
  case_id: string;
  driver_id: string;
  platform: Platform;
  deactivation_date: string;
  reactivation_date: string | null;
  as_of_date: string;
  use_fallback: boolean;
  params: PolicyDefaults;
}

// The preview is the single source of truth for every figure the UI shows;
// the *_display fields are rendered verbatim, never recomputed.
export interface ReportPreview {
  case: CaseRecord & Record<string, unknown>;
  params: Record<string, unknown>;
  driver: { name: string; contact: string | null };
  window: { start: string; end: string; total_cents: number; daily: [string, number][] };
  daily_average_display: string;
  deactivation_days: number;
  principal_cents: number;
  principal_display: string;
  interest_cents: number;
  interest_display: string;
  total_cents: number;
  total_display: string;
  fallback_used: boolean;
  short_history: boolean;
  interest_method: string;
  generated_at: string;
  engine_version: string;
}

export class ServiceApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = 'ServiceApiError';
  }
}

export class CaseServiceClient {
  constructor(
    private actor: Actor,
    private readonly base: string = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  setActor(actor: Actor): void {
    this.actor = actor;
  }

  get currentActor(): Actor {
    return this.actor;
  }

  private headers(): Record<string, string> {
    return {
      'Content-Type': 'application/json',
      'X-Actor-Id': this.actor.actorId,
      'X-Actor-Role': this.actor.role,
    };
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.fetchFn(this.base + path, {
      ...init,
      headers: { ...this.headers(), ...(init.headers ?? {}) },
    });
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const err = body?.error ?? { code: 'INTERNAL', message: 'request failed' };
      throw new ServiceApiError(err.code, err.message, response.status);
    }
    return body as T;
  }

  enrollDriver(contact: string, displayName: string): Promise<EnrollResult> {
    return this.request('/drivers', {
      method: 'POST',
      body: JSON.stringify({ contact, display_name: displayName }),
    });
  }

  verifyDriver(driverId: string, code: string): Promise<{ driver_id: string; state: string }> {
    return this.request(`/drivers/${driverId}/verify`, {
      method: 'POST',
      body: JSON.stringify({ code }),
    });
  }

  grantConsent(driverId: string, scope: ConsentScope): Promise<ConsentRecord> {
    return this.request(`/drivers/${driverId}/consent`, {
      method: 'POST',
      body: JSON.stringify({ scope }),
    });
  }

  revokeConsent(consentId: string): Promise<ConsentRecord> {
    return this.request(`/consents/${consentId}`, { method: 'DELETE' });
  }

  linkAccount(
    driverId: string,
    platform: Platform,
    connectorAccountId: string,
  ): Promise<{ account_id: string; state: string }> {
    return this.request(`/drivers/${driverId}/accounts`, {
      method: 'POST',
      body: JSON.stringify({ platform, connector_account_id: connectorAccountId }),
    });
  }

  accountStatus(accountId: string): Promise<AccountStatus> {
    return this.request(`/accounts/${accountId}/status`);
  }

  listDrivers(synced?: boolean): Promise<DriverRow[]> {
    const query = synced === undefined ? '' : `?synced=${synced}`;
    return this.request(`/drivers${query}`);
  }

  policyDefaults(): Promise<PolicyDefaults> {
    return this.request('/policy-defaults');
  }

  createCase(body: CreateCaseRequest): Promise<CaseRecord> {
    return this.request('/cases', { method: 'POST', body: JSON.stringify(body) });
  }

  casePreview(caseId: string, overrideSync = false): Promise<ReportPreview> {
    const query = overrideSync ? '?override_sync=true' : '';
    return this.request(`/cases/${caseId}/preview${query}`);
  }

  reportUrl(caseId: string, format: 'pdf' | 'csv' | 'zip'): string {
    return `${this.base}/cases/${caseId}/report.${format}`;
  }

  async fetchReport(caseId: string, format: 'pdf' | 'csv' | 'zip'): Promise<Blob> {
    const response = await this.fetchFn(this.reportUrl(caseId, format), {
      headers: this.headers(),
    });
    if (!response.ok) {
      const body = await response.json().catch(() => null);
      const err = body?.error ?? { code: 'INTERNAL', message: 'download failed' };
      throw new ServiceApiError(err.code, err.message, response.status);
    }
    return response.blob();
  }
}
