// Legal dashboard: driver list with sync badges, the case form (dates,
// platform, reference period and interest rate prefilled from the server's
// policy defaults), report preview, and downloads. Every figure on screen
// is a verbatim case-service value.

import { CaseServiceClient, DriverRow, ReportPreview } from './api.js';
import {
  CaseFormState,
  emptyForm,
  formErrors,
  generateDisabledReason,
  remediation,
  syncBadge,
} from './dashboardState.js';

export class DashboardView {
  private drivers: DriverRow[] = [];
  private form: CaseFormState = emptyForm();
  private preview: ReportPreview | null = null;
  private caseId: string | null = null;
  private error = '';

  constructor(
    private readonly root: HTMLElement,
    private readonly api: CaseServiceClient,
  ) {}

  async load(): Promise<void> {
    const [drivers, defaults] = await Promise.all([
      this.api.listDrivers(),
      this.api.policyDefaults(),
    ]);
    this.drivers = drivers;
    this.form.referenceDays = String(defaults.reference_days);
    this.form.interestRateBp = String(defaults.interest_rate_bp);
    this.render();
  }

  private selectedDriver(): DriverRow | null {
    return this.drivers.find((d) => d.driver_id === this.form.driverId) ?? null;
  }

  render(): void {
    this.root.innerHTML = `
      <div class="columns">
        <section class="drivers">
          <h2>Drivers</h2>
          <ul data-testid="driver-list"></ul>
        </section>
        <section class="casework">
          <h2>Lost wage report</h2>
          <form data-testid="case-form"></form>
          <p class="error" data-testid="dashboard-error">${this.error}</p>
          <section data-testid="preview-pane"></section>
        </section>
      </div>
    `;
    this.renderDriverList();
    this.renderForm();
    this.renderPreview();
  }

  private renderDriverList(): void {
    const list = this.root.querySelector<HTMLElement>('[data-testid=driver-list]')!;
    if (this.drivers.length === 0) {
      list.innerHTML =
        '<li class="hint" data-testid="onboarding-hint">No drivers yet. Drivers '
        + 'appear here after a field representative walks them through the '
        + 'sign-up wizard.</li>';
      return;
    }
    list.innerHTML = this.drivers
      .map((driver) => {
        const badges = driver.accounts
          .map((account) => {
            const badge = syncBadge(account.state);
            return `<span class="badge ${badge.tone}"
              data-testid="badge-${account.account_id}">${account.platform}: ${badge.label}</span>`;
          })
          .join(' ');
        const consent = driver.share_consent_active
          ? ''
          : '<span class="badge bad" data-testid="consent-missing">No share consent</span>';
        const selected = driver.driver_id === this.form.driverId ? 'selected' : '';
        return `<li class="driver ${selected}" data-driver="${driver.driver_id}"
          data-testid="driver-${driver.driver_id}">
          <strong>${driver.display_name}</strong> ${badges} ${consent}</li>`;
      })
      .join('');
    list.querySelectorAll<HTMLElement>('.driver').forEach((el) => {
      el.addEventListener('click', () => {
        this.form.driverId = el.dataset.driver ?? null;
        const driver = this.selectedDriver();
        this.form.platform = driver?.accounts[0]?.platform ?? null;
        this.preview = null;
        this.caseId = null;
        this.error = '';
        this.render();
      });
    });
  }

  private renderForm(): void {
    const form = this.root.querySelector<HTMLFormElement>('[data-testid=case-form]')!;
    const driver = this.selectedDriver();
    const platforms = [...new Set(driver?.accounts.map((a) => a.platform) ?? [])];
    const disabledReason =
      formErrors(this.form)[0] ?? generateDisabledReason(driver, this.form);
    form.innerHTML = `
      <label>Platform
        <select data-testid="form-platform" ${driver ? '' : 'disabled'}>
          ${platforms
            .map((p) => `<option value="${p}" ${p === this.form.platform ? 'selected' : ''}>${p}</option>`)
            .join('')}
        </select></label>
      <label>Deactivation date
        <input type="date" data-testid="form-deactivation" value="${this.form.deactivationDate}" /></label>
      <label>Reactivation date (optional)
        <input type="date" data-testid="form-reactivation" value="${this.form.reactivationDate}" /></label>
      <label>As-of date (optional)
        <input type="date" data-testid="form-asof" value="${this.form.asOfDate}" /></label>
      <label>Reference period, days
        <input data-testid="form-refdays" value="${this.form.referenceDays}" /></label>
      <label>Interest rate, basis points (1200 = 12%)
        <input data-testid="form-interest" value="${this.form.interestRateBp}" /></label>
      <label class="toggle"><input type="checkbox" data-testid="form-fallback"
        ${this.form.useFallback ? 'checked' : ''} />
        Use the standard daily rate (no trip data needed)</label>
      <button type="button" data-testid="generate"
        ${disabledReason ? 'disabled' : ''}>Generate report</button>
      <p class="hint" data-testid="generate-reason">${disabledReason ?? ''}</p>
    `;
    const bind = (testId: string, apply: (value: string) => void) => {
      const el = form.querySelector<HTMLInputElement | HTMLSelectElement>(
        `[data-testid=${testId}]`,
      )!;
      el.addEventListener('change', () => {
        apply((el as HTMLInputElement).value);
        this.render();
      });
    };
    bind('form-platform', (v) => (this.form.platform = v));
    bind('form-deactivation', (v) => (this.form.deactivationDate = v));
    bind('form-reactivation', (v) => (this.form.reactivationDate = v));
    bind('form-asof', (v) => (this.form.asOfDate = v));
    bind('form-refdays', (v) => (this.form.referenceDays = v));
    bind('form-interest', (v) => (this.form.interestRateBp = v));
    form.querySelector<HTMLInputElement>('[data-testid=form-fallback]')!
      .addEventListener('change', (event) => {
        this.form.useFallback = (event.target as HTMLInputElement).checked;
        this.render();
      });
    form.querySelector<HTMLButtonElement>('[data-testid=generate]')!
      .addEventListener('click', () => void this.generate());
  }

  private async generate(): Promise<void> {
    try {
      const created = await this.api.createCase({
        driver_id: this.form.driverId!,
        platform: this.form.platform! as DriverRow['accounts'][number]['platform'],
        deactivation_date: this.form.deactivationDate,
        reactivation_date: this.form.reactivationDate || null,
        as_of_date: this.form.asOfDate || null,
        use_fallback: this.form.useFallback,
        params: {
          reference_days: Number(this.form.referenceDays),
          interest_rate_bp: Number(this.form.interestRateBp),
        },
      });
      this.caseId = created.case_id;
      this.preview = await this.api.casePreview(created.case_id);
      this.error = '';
    } catch (err) {
      this.preview = null;
      this.error = remediation(err);
    }
    this.render();
  }

  private renderPreview(): void {
    const pane = this.root.querySelector<HTMLElement>('[data-testid=preview-pane]')!;
    if (!this.preview || !this.caseId) {
      pane.innerHTML = '';
      return;
    }
    const p = this.preview;
    pane.innerHTML = `
      <h3>Preview: ${this.caseId}</h3>
      <table class="figures">
        <tr><td>Reference window</td>
          <td data-testid="preview-window">${p.window.start} to ${p.window.end}</td></tr>
        <tr><td>Daily average</td>
          <td data-testid="preview-daily-average">${p.daily_average_display}</td></tr>
        <tr><td>Days deactivated</td>
          <td data-testid="preview-days">${p.deactivation_days}</td></tr>
        <tr><td>Principal</td>
          <td data-testid="preview-principal">${p.principal_display}</td></tr>
        <tr><td>Interest</td>
          <td data-testid="preview-interest">${p.interest_display}</td></tr>
        <tr><td><strong>Total</strong></td>
          <td data-testid="preview-total"><strong>${p.total_display}</strong></td></tr>
      </table>
      ${p.fallback_used
        ? '<p class="badge warn" data-testid="preview-fallback">Standard daily rate applied</p>'
        : ''}
      <p class="fine" data-testid="preview-method">${p.interest_method}</p>
      <div class="downloads">
        <button data-testid="download-pdf">Download PDF</button>
        <button data-testid="download-csv">Download CSV</button>
        <button data-testid="download-zip">Download ZIP</button>
      </div>
    `;
    for (const format of ['pdf', 'csv', 'zip'] as const) {
      pane.querySelector<HTMLButtonElement>(`[data-testid=download-${format}]`)!
        .addEventListener('click', () => void this.download(format));
    }
  }

  async download(format: 'pdf' | 'csv' | 'zip'): Promise<Blob> {
    // Downloads go through fetch because the actor headers cannot ride on a
    // plain anchor click.
    const blob = await this.api.fetchReport(this.caseId!, format);
    if (typeof URL.createObjectURL === 'function') {
      const link = document.createElement('a');
      link.href = URL.createObjectURL(blob);
      link.download = `${this.caseId}-report.${format}`;
      link.click();
      URL.revokeObjectURL(link.href);
    }
    return blob;
  }
}
