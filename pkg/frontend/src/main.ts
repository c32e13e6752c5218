// Browser entry point. Hash routing: #/intake (default) runs the driver
// sign-up wizard; #/dashboard runs the legal-team view. Sessions are
// demo-grade: the dashboard uses an attorney actor, the wizard a driver
// actor that binds to the enrolled driver id.

import { CaseServiceClient } from './api.js';
import { DashboardView } from './dashboard.js';
import { IntakeWizard } from './wizardState.js';
import { WizardView } from './wizard.js';

function mount(): void {
  const root = document.getElementById('app');
  if (!root) return;

  const route = window.location.hash || '#/intake';
  if (route.startsWith('#/dashboard') || route.startsWith('#/fieldrep')) {
    // Field representatives get the same screen scoped down by the server:
    // the driver list renders, report generation is denied by role.
    const actor = route.startsWith('#/fieldrep')
      ? { actorId: 'dashboard-fieldrep', role: 'FIELD_REP' as const }
      : { actorId: 'dashboard-attorney', role: 'ATTORNEY' as const };
    const api = new CaseServiceClient(actor);
    const view = new DashboardView(root, api);
    void view.load().catch(() => {
      root.innerHTML = '<p class="error">Could not reach the case service.</p>';
    });
  } else {
    const api = new CaseServiceClient({ actorId: 'intake-session', role: 'DRIVER' });
    const wizard = new IntakeWizard(api, window.localStorage);
    if (wizard.session.driverId) {
      api.setActor({ actorId: wizard.session.driverId, role: 'DRIVER' });
    }
    new WizardView(root, wizard).render();
  }
}

window.addEventListener('hashchange', mount);
mount();
