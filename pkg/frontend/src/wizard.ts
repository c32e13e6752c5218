// DOM wiring for the driver intake wizard. Field representatives run this
// on drivers' devices, so the copy is plain-language first: each consent
// screen shows a summary up top and the formal text below it, and the
// formal text must be opened before the consent button unlocks.

import { ServiceApiError } from './api.js';
import { IntakeWizard, WIZARD_STEPS, WizardStep, syncMessage } from './wizardState.js';

const STEP_TITLES: Record<WizardStep, string> = {
  'join': 'Join',
  'study-consent': 'Study consent',
  'share-opt-in': 'Share with your organization',
  'account-link': 'Link your rideshare account',
  'done': "You're done!",
};

const STUDY_SUMMARY =
  'Plain language: you are joining a research study. Your trip history will '
  + 'be collected to estimate pay you lost while deactivated. You can leave '
  + 'the study at any time.';

const STUDY_FORMAL =
  'Formal consent: I voluntarily agree to participate in this study. I '
  + 'understand my rideshare trip records, including earnings, times, and '
  + 'locations, will be collected and stored securely, used for research, '
  + 'and that I may withdraw at any time without penalty by contacting the '
  + 'study team.';

const SHARE_SUMMARY =
  'Plain language: tapping Share lets your driver organization see your '
  + 'synced trips and earnings so its legal team can calculate your lost '
  + 'wages and represent you. If you skip this, your data stays in the '
  + 'study only and the legal team cannot use it.';

const SHARE_FORMAL =
  'Formal consent: I authorize the driver organization and its legal team '
  + 'to access my synced trip and earnings data for the purpose of '
  + 'estimating lost wages and representing me in deactivation proceedings. '
  + 'I may revoke this authorization at any time.';

export class WizardView {
  private notice = '';
  private rewardLine = '';

  constructor(
    private readonly root: HTMLElement,
    private readonly wizard: IntakeWizard,
  ) {}

  render(): void {
    const step = this.wizard.session.step;
    this.root.innerHTML = `
      <ol class="stepper" data-testid="stepper">
        ${WIZARD_STEPS.map((s, i) => {
          const state =
            s === step ? 'current' : i < this.wizard.stepIndex() ? 'complete' : 'todo';
          return `<li class="step ${state}" data-step="${s}">${STEP_TITLES[s]}</li>`;
        }).join('')}
      </ol>
      <section class="panel" data-testid="panel-${step}"></section>
      <p class="notice" data-testid="notice">${this.notice}</p>
    `;
    this.root.querySelectorAll<HTMLElement>('.step').forEach((el) => {
      el.addEventListener('click', () => this.tryNavigate(el.dataset.step as WizardStep));
    });
    const panel = this.root.querySelector<HTMLElement>('.panel')!;
    this.renderStep(panel, step);
  }

  private tryNavigate(target: WizardStep): void {
    try {
      this.wizard.goto(target);
      this.notice = '';
    } catch {
      this.notice = 'Please finish the current step first; the sign-up steps go in order.';
    }
    this.render();
  }

  private flash(message: string): void {
    this.notice = message;
    this.render();
  }

  private async run(action: () => Promise<void>, failMessage: string): Promise<void> {
    try {
      await action();
      this.notice = '';
    } catch (err) {
      if (err instanceof ServiceApiError) {
        this.notice = `${failMessage} (${err.message})`;
      } else {
        this.notice = failMessage;
      }
    }
    this.render();
  }

  private renderStep(panel: HTMLElement, step: WizardStep): void {
    switch (step) {
      case 'join':
        this.renderJoin(panel);
        break;
      case 'study-consent':
        this.renderConsent(panel, {
          summary: STUDY_SUMMARY,
          formal: STUDY_FORMAL,
          acceptLabel: 'I agree, continue',
          acceptTestId: 'consent-study',
          onAccept: () => this.run(() => this.wizard.consentToStudy(),
                                   'Could not record consent.'),
        });
        break;
      case 'share-opt-in':
        this.renderConsent(panel, {
          summary: SHARE_SUMMARY,
          formal: SHARE_FORMAL,
          acceptLabel: 'Share',
          acceptTestId: 'consent-share',
          declinable: true,
          onAccept: () => this.run(() => this.wizard.optInToShare(),
                                   'Could not record the share opt-in.'),
          onDecline: () => {
            this.wizard.declineShare();
            this.notice = '';
            this.render();
          },
        });
        break;
      case 'account-link':
        this.renderLink(panel);
        break;
      case 'done':
        this.renderDone(panel);
        break;
    }
  }

  private renderJoin(panel: HTMLElement): void {
    const enrolled = Boolean(this.wizard.session.driverId);
    if (!enrolled) {
      panel.innerHTML = `
        <h2>Join our study</h2>
        <label>Phone or email
          <input data-testid="join-contact" placeholder="you@example.com" /></label>
        <label>Your name
          <input data-testid="join-name" /></label>
        <button data-testid="join-submit">Join Our Study</button>
      `;
      panel.querySelector<HTMLButtonElement>('[data-testid=join-submit]')!
        .addEventListener('click', () => {
          const contact =
            panel.querySelector<HTMLInputElement>('[data-testid=join-contact]')!.value.trim();
          const name =
            panel.querySelector<HTMLInputElement>('[data-testid=join-name]')!.value.trim();
          if (!contact || !name) {
            this.flash('Enter your contact and name to join.');
            return;
          }
          void this.run(() => this.wizard.join(contact, name), 'Could not sign you up.');
        });
      return;
    }

    const locked = this.wizard.session.otpLocked;
    panel.innerHTML = `
      <h2>Enter your verification code</h2>
      <p>We texted a 6-digit code to ${this.wizard.session.contact}.</p>
      <label>Code <input data-testid="otp-code" inputmode="numeric" /></label>
      <button data-testid="otp-submit" ${locked ? 'disabled' : ''}>Verify</button>
      ${locked
        ? '<p data-testid="otp-locked">Too many wrong codes. Tap below to sign up '
          + 'again and receive a fresh code.</p>'
          + '<button data-testid="otp-restart">Send a new code</button>'
        : ''}
    `;
    panel.querySelector<HTMLButtonElement>('[data-testid=otp-submit]')!
      .addEventListener('click', () => {
        const code = panel.querySelector<HTMLInputElement>('[data-testid=otp-code]')!.value.trim();
        void this.run(
          () => this.wizard.verify(code),
          'That code did not match. Check the latest text and try again.',
        );
      });
    panel.querySelector<HTMLButtonElement>('[data-testid=otp-restart]')
      ?.addEventListener('click', () => {
        const { contact, displayName } = this.wizard.session;
        this.wizard.reset();
        void this.run(
          () => this.wizard.join(contact ?? '', displayName ?? ''),
          'Could not restart sign-up.',
        );
      });
  }

  private renderConsent(
    panel: HTMLElement,
    opts: {
      summary: string;
      formal: string;
      acceptLabel: string;
      acceptTestId: string;
      declinable?: boolean;
      onAccept: () => void;
      onDecline?: () => void;
    },
  ): void {
    panel.innerHTML = `
      <p class="summary">${opts.summary}</p>
      <details data-testid="formal-text"><summary>Read the full consent text</summary>
        <p>${opts.formal}</p>
      </details>
      <button data-testid="${opts.acceptTestId}" disabled
        title="Open and read the full consent text first">${opts.acceptLabel}</button>
      ${opts.declinable
        ? '<button data-testid="consent-decline" class="secondary">No thanks, skip sharing</button>'
        : ''}
    `;
    const details = panel.querySelector<HTMLDetailsElement>('[data-testid=formal-text]')!;
    const accept = panel.querySelector<HTMLButtonElement>(`[data-testid=${opts.acceptTestId}]`)!;
    // The formal text is required reading before the consent button enables.
    details.addEventListener('toggle', () => {
      if (details.open) accept.disabled = false;
    });
    accept.addEventListener('click', () => opts.onAccept());
    panel.querySelector<HTMLButtonElement>('[data-testid=consent-decline]')
      ?.addEventListener('click', () => opts.onDecline?.());
  }

  private renderLink(panel: HTMLElement): void {
    panel.innerHTML = `
      <h2>Link your Uber or Lyft account</h2>
      <p>Sign in with the phone number or email on your rideshare account.</p>
      <label>Platform
        <select data-testid="link-platform">
          <option value="UBER">Uber</option>
          <option value="LYFT">Lyft</option>
        </select></label>
      <label>Account sign-in (phone or email)
        <input data-testid="link-account" /></label>
      <button data-testid="link-submit">Link account</button>
    `;
    panel.querySelector<HTMLButtonElement>('[data-testid=link-submit]')!
      .addEventListener('click', () => {
        const platform =
          panel.querySelector<HTMLSelectElement>('[data-testid=link-platform]')!.value as
            'UBER' | 'LYFT';
        const account =
          panel.querySelector<HTMLInputElement>('[data-testid=link-account]')!.value.trim();
        if (!account) {
          this.flash('Enter the account sign-in to link.');
          return;
        }
        void this.run(
          () => this.wizard.linkAccount(platform, account),
          'Linking did not go through. Check the sign-in details and try again.',
        );
      });
  }

  private renderDone(panel: HTMLElement): void {
    const declined = this.wizard.session.shareDeclined;
    panel.innerHTML = `
      <h2>You're done!</h2>
      <p>Thanks for joining. Your trip history will sync in the background.</p>
      ${declined
        ? '<p data-testid="done-declined">You chose not to share data with your '
          + 'organization. You can opt in later by signing in again.</p>'
        : ''}
      <p data-testid="reward">${this.rewardLine}</p>
      <button data-testid="check-sync">Check sync status</button>
    `;
    panel.querySelector<HTMLButtonElement>('[data-testid=check-sync]')!
      .addEventListener('click', async () => {
        try {
          const reward = await this.wizard.syncReward();
          this.rewardLine = reward.takeRate
            ? `${reward.message} The platform kept ${reward.takeRate} of what riders `
              + 'paid (excluding tips) on your trips.'
            : reward.message;
        } catch {
          this.rewardLine = syncMessage('PENDING');
        }
        this.render();
      });
  }
}
