// Handover flow: pick a receiving caregiver (family members only), confirm
// explicitly, submit, then surface any availability warnings the API
// returned. The API never rejects on availability; a warned handover can be
// reversed from the same dialog.

import type { ApiClient } from './api'
import { escapeHtml } from './format'
import type { Family, HandoverResult, TimesheetRow } from './types'

export interface HandoverFlowResult {
  completed: boolean
  result?: HandoverResult
}

export function renderHandoverDialog(
  root: HTMLElement,
  row: TimesheetRow,
  family: Family,
  onSubmit: (to: string) => void,
  onCancel: () => void,
): void {
  const current = row.owners[0]
  const candidates = family.caregivers
    .map((c) => c.caregiver_id)
    .filter((id) => !row.owners.includes(id))
  root.innerHTML = `
    <form class="handover-dialog">
      <h3>Hand over ${escapeHtml(row.subtask_name)}</h3>
      <p>Currently with <strong>${escapeHtml(current)}</strong>.</p>
      <label>To
        <select name="to">
          ${candidates
            .map((id) => `<option value="${escapeHtml(id)}">${escapeHtml(id)}</option>`)
            .join('')}
        </select>
      </label>
      <div class="dialog-actions">
        <button type="submit" class="confirm" ${candidates.length ? '' : 'disabled'}>
          confirm handover
        </button>
        <button type="button" class="cancel">cancel</button>
      </div>
      <p class="warnings" hidden></p>
    </form>`

  const form = root.querySelector('form') as HTMLFormElement
  form.addEventListener('submit', (event) => {
    event.preventDefault()
    const select = form.elements.namedItem('to') as HTMLSelectElement
    if (select.value) onSubmit(select.value)
  })
  root.querySelector('.cancel')?.addEventListener('click', onCancel)
}

export async function submitHandover(
  api: ApiClient,
  planId: string,
  row: TimesheetRow,
  to: string,
  root: HTMLElement,
): Promise<HandoverFlowResult> {
  const result = await api.handover(planId, row.subtask_name, row.owners[0], to)
  const warningsEl = root.querySelector<HTMLElement>('.warnings')
  if (result.warnings.length && warningsEl) {
    warningsEl.hidden = false
    warningsEl.innerHTML =
      `<strong>Heads up:</strong> ${result.warnings
        .map((w) => escapeHtml(w.detail))
        .join('; ')} ` +
      '<button type="button" class="undo">hand back</button>'
    warningsEl.querySelector('.undo')?.addEventListener('click', () => {
      void api.handover(planId, row.subtask_name, to, row.owners[0])
      warningsEl.hidden = true
    })
  }
  return { completed: true, result }
}
