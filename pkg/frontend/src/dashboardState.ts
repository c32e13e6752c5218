// View-model helpers for the legal dashboard. Pure functions, no DOM and
// deliberately no money arithmetic: the dashboard shows exactly what the
// case service responded with.

import { DriverRow, ServiceApiError } from './api.js';

export interface SyncBadge {
  label: string;
  tone: 'ok' | 'warn' | 'bad' | 'muted';
}

export function syncBadge(state: string): SyncBadge {
  switch (state) {
    case 'SYNCED':
      return { label: 'Synced', tone: 'ok' };
    case 'SYNCING':
      return { label: 'Syncing…', tone: 'warn' };
    case 'FAILED':
      return { label: 'Sync failed', tone: 'bad' };
    default:
      return { label: 'Waiting', tone: 'muted' };
  }
}

export interface CaseFormState {
  driverId: string | null;
  platform: string | null;
  deactivationDate: string;
  reactivationDate: string;
  asOfDate: string;
  referenceDays: string; // prefilled from /policy-defaults
  interestRateBp: string; // prefilled from /policy-defaults
  useFallback: boolean;
}

export function emptyForm(): CaseFormState {
  return {
    driverId: null,
    platform: null,
    deactivationDate: '',
    reactivationDate: '',
    asOfDate: '',
    referenceDays: '',
    interestRateBp: '',
    useFallback: false,
  };
}

export function formErrors(form: CaseFormState): string[] {
  const errors: string[] = [];
  if (!form.driverId) errors.push('Select a driver.');
  if (!form.platform) errors.push('Select the platform.');
  if (!form.deactivationDate) errors.push('Enter the deactivation date.');
  if (
    form.reactivationDate &&
    form.deactivationDate &&
    form.reactivationDate < form.deactivationDate
  ) {
    errors.push('Reactivation cannot precede deactivation.');
  }
  if (form.referenceDays && !/^\d+$/.test(form.referenceDays)) {
    errors.push('Reference period must be whole days.');
  }
  if (form.interestRateBp && !/^\d+$/.test(form.interestRateBp)) {
    errors.push('Interest rate must be whole basis points.');
  }
  return errors;
}

/**
 * Whether Generate is available for the selected driver. Accounts that
 * failed to sync disable generation unless the fallback toggle is on.
 */
export function generateDisabledReason(
  driver: DriverRow | null,
  form: CaseFormState,
): string | null {
  if (!driver || !form.platform) return 'Select a driver and platform.';
  const accounts = driver.accounts.filter((a) => a.platform === form.platform);
  if (accounts.length === 0) return 'No linked account on this platform.';
  if (accounts.every((a) => a.state === 'SYNCED')) return null;
  if (accounts.some((a) => a.state === 'FAILED') && !form.useFallback) {
    return 'This account failed to sync. Turn on the standard daily rate '
      + '(fallback) to generate a report without trip data.';
  }
  if (accounts.some((a) => a.state === 'SYNCING' || a.state === 'PENDING') && !form.useFallback) {
    return 'This account is still syncing; wait for it to finish or use the fallback rate.';
  }
  return null;
}

/** Operator-facing remediation for API failures. */
export function remediation(err: unknown): string {
  if (err instanceof ServiceApiError) {
    switch (err.code) {
      case 'CONSENT_REQUIRED':
        return 'This driver has not opted in to share data with the '
          + 'organization. Re-invite them to sign in and tap the Share '
          + 'button; reports unlock immediately after they opt in.';
      case 'SYNC_INCOMPLETE':
        return 'Account sync is incomplete. Enable the fallback daily rate '
          + 'or acknowledge partial data to proceed.';
      case 'FORBIDDEN':
        return 'Your role does not permit this action.';
      default:
        return err.message;
    }
  }
  return 'Something went wrong. Try again.';
}
