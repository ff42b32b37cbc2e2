// The shared weekly timesheet: a 7-day grid of subtask cells colored by
// owner. Clicking a cell opens the task card with the live details and the
// status/handover/support actions.

import { escapeHtml, DAY_LABELS, ownerColors, statusLabel, timeRange } from './format'
import type { PlanReport, Timesheet, TimesheetRow } from './types'

export interface TimesheetCallbacks {
  onOpenCard?: (row: TimesheetRow) => void
}

export function flaggedSubtasks(report: PlanReport | null): Set<string> {
  const flagged = new Set<string>()
  if (!report) return flagged
  for (const score of report.scores) {
    for (const finding of score.findings) {
      for (const name of finding.subtasks) flagged.add(name)
    }
  }
  return flagged
}

export function renderTimesheet(
  root: HTMLElement,
  sheet: Timesheet,
  report: PlanReport | null = null,
  callbacks: TimesheetCallbacks = {},
): void {
  const owners = ownerColors(
    [...new Set(sheet.subtasks.flatMap((row) => row.owners))],
  )
  const flagged = flaggedSubtasks(report)

  const byDay = new Map<number, TimesheetRow[]>()
  for (let day = 1; day <= 7; day += 1) byDay.set(day, [])
  for (const row of sheet.subtasks) byDay.get(row.day)?.push(row)
  for (const rows of byDay.values()) {
    rows.sort((a, b) => (a.start < b.start ? -1 : a.start > b.start ? 1 : 0))
  }

  const columns = DAY_LABELS.map((label, index) => {
    const rows = byDay.get(index + 1) ?? []
    const cells = rows
      .map((row) => {
        const color = owners.get(row.owners[0]) ?? '#888'
        const badge = flagged.has(row.subtask_name)
          ? '<span class="badge" title="flagged in the quality report">!</span>'
          : ''
        return `
          <button class="cell status-${row.status}" style="border-left-color:${color}"
                  data-subtask="${escapeHtml(row.subtask_name)}">
            <span class="time">${timeRange(row.start, row.end)}</span>
            <span class="name">${escapeHtml(row.subtask_name)}</span>
            <span class="owners">${row.owners.map(escapeHtml).join(', ')}</span>
            ${badge}
          </button>`
      })
      .join('')
    return `
      <section class="day-column" data-day="${index + 1}">
        <h3>${label}</h3>
        ${cells || '<p class="empty">free</p>'}
      </section>`
  })

  root.innerHTML = `
    ${sheet.summary ? `<p class="plan-summary">${escapeHtml(sheet.summary)}</p>` : ''}
    <div class="timesheet-grid">${columns.join('')}</div>`

  if (callbacks.onOpenCard) {
    const byName = new Map(sheet.subtasks.map((row) => [row.subtask_name, row]))
    for (const cell of root.querySelectorAll<HTMLButtonElement>('.cell')) {
      cell.addEventListener('click', () => {
        const row = byName.get(cell.dataset.subtask ?? '')
        if (row) callbacks.onOpenCard?.(row)
      })
    }
  }
}

export interface TaskCardActions {
  onAdvanceStatus?: (row: TimesheetRow) => void
  onHandover?: (row: TimesheetRow) => void
  onOpenSupport?: (row: TimesheetRow) => void
  onClose?: () => void
}

export function renderTaskCard(
  root: HTMLElement,
  row: TimesheetRow,
  actions: TaskCardActions = {},
): void {
  const notes = row.notes
    .map(
      ([author, text]) =>
        `<li><strong>${escapeHtml(author)}</strong>: ${escapeHtml(text)}</li>`,
    )
    .join('')
  const handovers = row.handover_log
    .map(
      ([from, to]) =>
        `<li>${escapeHtml(from)} → ${escapeHtml(to)}</li>`,
    )
    .join('')
  const nextStatus = row.status === 'pending' ? 'in_progress' : 'done'
  root.innerHTML = `
    <article class="task-card" data-subtask="${escapeHtml(row.subtask_name)}">
      <header>
        <h2>${escapeHtml(row.subtask_name)}</h2>
        <button class="close" aria-label="close">×</button>
      </header>
      <dl>
        <dt>What</dt><dd>${escapeHtml(row.description)}</dd>
        <dt>How to tutor</dt><dd>${escapeHtml(row.tutoring_method)}</dd>
        <dt>Owner</dt><dd class="card-owners">${row.owners.map(escapeHtml).join(', ')}</dd>
        <dt>When</dt><dd>Day ${row.day}, ${timeRange(row.start, row.end)}</dd>
        <dt>Status</dt><dd class="card-status">${statusLabel(row.status)}</dd>
      </dl>
      <div class="card-actions">
        ${row.status !== 'done'
          ? `<button class="advance">mark ${statusLabel(nextStatus)}</button>`
          : ''}
        <button class="handover">hand over</button>
        <button class="support">task support</button>
      </div>
      <section class="notes-pane">
        <h4>Notes</h4>
        <ul>${notes || '<li class="empty">none yet</li>'}</ul>
      </section>
      ${handovers ? `<section class="handover-log"><h4>Handovers</h4><ul>${handovers}</ul></section>` : ''}
    </article>`

  root.querySelector('.close')?.addEventListener('click', () => actions.onClose?.())
  root.querySelector('.advance')?.addEventListener('click', () => actions.onAdvanceStatus?.(row))
  root.querySelector('.handover')?.addEventListener('click', () => actions.onHandover?.(row))
  root.querySelector('.support')?.addEventListener('click', () => actions.onOpenSupport?.(row))
}
