// Intake wizard state machine. The step order is fixed:
//   join -> study-consent -> share-opt-in -> account-link -> done
// No step can be skipped; the org-share step is the one exception in that
// it can be *declined* (the decline is recorded), which still completes it.
// The session persists across reloads via the injected storage.

import {
  CaseServiceClient,
  ConsentScope,
  Platform,
  ServiceApiError,
} from './api.js';

export const WIZARD_STEPS = [
  'join',
  'study-consent',
  'share-opt-in',
  'account-link',
  'done',
] as const;

export type WizardStep = (typeof WIZARD_STEPS)[number];

export interface WizardSession {
  step: WizardStep;
  contact?: string;
  displayName?: string;
  driverId?: string;
  verified: boolean;
  studyConsentId?: string;
  shareConsentId?: string;
  shareDeclined: boolean;
  linkedAccountId?: string;
  linkedPlatform?: Platform;
  otpLocked: boolean;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class WizardOrderError extends Error {
  constructor(attempted: WizardStep, current: WizardStep) {
    super(`cannot jump to "${attempted}" from "${current}": steps are strictly ordered`);
    this.name = 'WizardOrderError';
  }
}

const FRESH: WizardSession = {
  step: 'join',
  verified: false,
  shareDeclined: false,
  otpLocked: false,
};

export class IntakeWizard {
  session: WizardSession;

  constructor(
    private readonly api: CaseServiceClient,
    private readonly storage: StorageLike,
    private readonly storageKey = 'wageclaim.intake',
  ) {
    const saved = storage.getItem(storageKey);
    this.session = saved ? { ...FRESH, ...JSON.parse(saved) } : { ...FRESH };
  }

  private save(): void {
    this.storage.setItem(this.storageKey, JSON.stringify(this.session));
  }

  reset(): void {
    this.session = { ...FRESH };
    this.storage.removeItem(this.storageKey);
  }

  stepIndex(step: WizardStep = this.session.step): number {
    return WIZARD_STEPS.indexOf(step);
  }

  /** Completed steps may be revisited; everything past the current step is off limits. */
  goto(step: WizardStep): void {
    if (this.stepIndex(step) > this.stepIndex()) {
      throw new WizardOrderError(step, this.session.step);
    }
    // Navigation back is view-only; completed state is never discarded.
  }

  private advance(expectedFrom: WizardStep, to: WizardStep): void {
    if (this.session.step !== expectedFrom) {
      throw new WizardOrderError(to, this.session.step);
    }
    this.session.step = to;
    this.save();
  }

  // ---- step 1: join ----

  async join(contact: string, displayName: string): Promise<void> {
    if (this.session.step !== 'join') {
      throw new WizardOrderError('join', this.session.step);
    }
    const result = await this.api.enrollDriver(contact, displayName);
    this.session.contact = contact;
    this.session.displayName = displayName;
    this.session.driverId = result.driver_id;
    this.session.otpLocked = false;
    // Joining binds the wizard's driver identity for all later calls.
    this.api.setActor({ actorId: result.driver_id, role: 'DRIVER' });
    this.save();
  }

  /** Verify the texted code. Wrong codes keep the step open for retry. */
  async verify(code: string): Promise<void> {
    if (this.session.step !== 'join' || !this.session.driverId) {
      throw new WizardOrderError('join', this.session.step);
    }
    try {
      await this.api.verifyDriver(this.session.driverId, code);
    } catch (err) {
      if (err instanceof ServiceApiError && err.code === 'OTP_LOCKED') {
        this.session.otpLocked = true;
        this.save();
      }
      throw err;
    }
    this.session.verified = true;
    this.advance('join', 'study-consent');
  }

  // ---- step 2: study consent (required) ----

  async consentToStudy(): Promise<void> {
    if (this.session.step !== 'study-consent' || !this.session.driverId) {
      throw new WizardOrderError('study-consent', this.session.step);
    }
    const record = await this.api.grantConsent(this.session.driverId, 'STUDY_ONLY');
    this.session.studyConsentId = record.consent_id;
    this.advance('study-consent', 'share-opt-in');
  }

  // ---- step 3: org share opt-in (declinable, recorded) ----

  async optInToShare(): Promise<void> {
    if (this.session.step !== 'share-opt-in' || !this.session.driverId) {
      throw new WizardOrderError('share-opt-in', this.session.step);
    }
    const record = await this.api.grantConsent(this.session.driverId, 'SHARE_WITH_ORG');
    this.session.shareConsentId = record.consent_id;
    this.session.shareDeclined = false;
    this.advance('share-opt-in', 'account-link');
  }

  declineShare(): void {
    if (this.session.step !== 'share-opt-in') {
      throw new WizardOrderError('share-opt-in', this.session.step);
    }
    this.session.shareDeclined = true;
    this.advance('share-opt-in', 'account-link');
  }

  // ---- step 4: account link ----

  async linkAccount(platform: Platform, connectorAccountId: string): Promise<void> {
    if (this.session.step !== 'account-link' || !this.session.driverId) {
      throw new WizardOrderError('account-link', this.session.step);
    }
    await this.api.linkAccount(this.session.driverId, platform, connectorAccountId);
    this.session.linkedAccountId = connectorAccountId;
    this.session.linkedPlatform = platform;
    this.advance('account-link', 'done');
  }

  // ---- step 5: done (take-rate reward appears once data syncs) ----

  async syncReward(): Promise<{ state: string; message: string; takeRate: string | null }> {
    if (!this.session.linkedAccountId) {
      return { state: 'PENDING', message: 'No account linked yet.', takeRate: null };
    }
    const status = await this.api.accountStatus(this.session.linkedAccountId);
    return {
      state: status.state,
      message: syncMessage(status.state),
      takeRate: status.take_rate_display ?? null,
    };
  }
}

/** Plain-language sync status, written for drivers rather than operators. */
export function syncMessage(state: string): string {
  switch (state) {
    case 'SYNCED':
      return 'Your trip history has finished syncing.';
    case 'FAILED':
      return 'The rideshare platform could not share your trips automatically. '
        + 'Nothing is wrong with your account; your representative can still '
        + 'file your claim using the standard daily rate.';
    case 'SYNCING':
    case 'PENDING':
      return 'Your trips are still syncing. This usually takes a few hours '
        + 'and can take up to a day; you can close this page.';
    default:
      return 'Sync status unknown.';
  }
}
