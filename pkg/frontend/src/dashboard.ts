// Per-caregiver progress dashboard. Rows are alphabetical by caregiver id,
// never ranked, so the view reads as shared progress rather than a
// scoreboard.

import { escapeHtml } from './format'
import type { Engagement } from './types'

export function renderDashboard(root: HTMLElement, engagement: Engagement): void {
  const rows = [...engagement.caregivers]
    .sort((a, b) => a.caregiver_id.localeCompare(b.caregiver_id))
    .map(
      (row) => `
      <tr data-caregiver="${escapeHtml(row.caregiver_id)}">
        <th scope="row">${escapeHtml(row.caregiver_id)}</th>
        <td class="tasks-completed">${row.tasks_completed}</td>
        <td class="subtasks-executed">${row.subtasks_executed}</td>
        <td>${row.used_new_example ? '✓' : ''}</td>
        <td>${row.used_answer_checking ? '✓' : ''}</td>
        <td>${row.used_tutoring_guidance ? '✓' : ''}</td>
      </tr>`,
    )
    .join('')
  root.innerHTML = `
    <table class="dashboard">
      <thead>
        <tr>
          <th>Caregiver</th>
          <th>Tasks completed</th>
          <th>Subtasks done</th>
          <th>New examples</th>
          <th>Answer checking</th>
          <th>Tutoring guidance</th>
        </tr>
      </thead>
      <tbody>${rows}</tbody>
    </table>`
}
