// App shell: connect panel, tabbed views (setup / timesheet / dashboard),
// task card and support wiring, and the polling loop. Status changes apply
// optimistically and roll back when the API reports a conflict.

import { ApiClient, ApiRequestError } from './api'
import { renderDashboard } from './dashboard'
import { renderHandoverDialog, submitHandover } from './handover'
import { Poller } from './poll'
import { generatePlan, renderProfileEditor, renderTaskListEditor } from './setup'
import { renderSupportPanel, wireSupportPanel, type SupportPanelState } from './support'
import { renderTaskCard, renderTimesheet } from './timesheet'
import type { Family, LearningTask, PlanReport, Status, Timesheet, TimesheetRow } from './types'

interface AppConfig {
  baseUrl: string
  token: string
  familyId: string
  caregiverId: string
  pollMs: number
}

export interface App {
  api: ApiClient
  poller: Poller
  refresh: () => Promise<void>
  setPlan: (planId: string) => void
}

const NEXT_STATUS: Record<Status, Status | null> = {
  pending: 'in_progress',
  in_progress: 'done',
  done: null,
}

export function createApp(root: HTMLElement, config: AppConfig): App {
  const api = new ApiClient(config.baseUrl, config.token)
  let family: Family | null = null
  let planId: string | null = null
  let timesheet: Timesheet | null = null
  let report: PlanReport | null = null
  let tasks: LearningTask[] = []
  const supportState: SupportPanelState = { history: [] }

  root.innerHTML = `
    <header class="app-header">
      <h1>Family week planner</h1>
      <nav class="tabs">
        <button data-tab="setup" class="active">Plan setup</button>
        <button data-tab="timesheet">Timesheet</button>
        <button data-tab="dashboard">Progress</button>
      </nav>
    </header>
    <main>
      <section id="view-setup">
        <div class="profiles"></div>
        <div class="task-list"></div>
        <button class="generate">Initial task plan</button>
        <div class="suggestion-slot"></div>
      </section>
      <section id="view-timesheet" hidden>
        <div class="sheet-slot"></div>
      </section>
      <section id="view-dashboard" hidden>
        <div class="dashboard-slot"></div>
      </section>
    </main>
    <div class="card-slot" hidden></div>
    <div class="dialog-slot" hidden></div>
    <div class="support-slot" hidden></div>
    <p class="toast" hidden></p>`

  const el = <T extends HTMLElement = HTMLElement>(selector: string): T => {
    const found = root.querySelector<T>(selector)
    if (!found) throw new Error(`missing element ${selector}`)
    return found
  }

  const toast = (text: string) => {
    const box = el('.toast')
    box.textContent = text
    box.hidden = false
    setTimeout(() => (box.hidden = true), 4000)
  }

  for (const button of root.querySelectorAll<HTMLButtonElement>('.tabs button')) {
    button.addEventListener('click', () => {
      for (const other of root.querySelectorAll('.tabs button')) {
        other.classList.toggle('active', other === button)
      }
      for (const view of root.querySelectorAll<HTMLElement>('main > section')) {
        view.hidden = view.id !== `view-${button.dataset.tab}`
      }
    })
  }

  function renderSheet(): void {
    if (!timesheet) return
    renderTimesheet(el('.sheet-slot'), timesheet, report, {
      onOpenCard: openCard,
    })
  }

  function openCard(row: TimesheetRow): void {
    const slot = el('.card-slot')
    slot.hidden = false
    renderTaskCard(slot, row, {
      onClose: () => {
        slot.hidden = true
        slot.innerHTML = ''
      },
      onAdvanceStatus: (target) => void advanceStatus(target),
      onHandover: (target) => openHandover(target),
      onOpenSupport: (target) => openSupport(target),
    })
  }

  async function advanceStatus(row: TimesheetRow): Promise<void> {
    if (!planId || !timesheet) return
    const next = NEXT_STATUS[row.status]
    if (!next) return
    const previous = row.status
    row.status = next // optimistic
    renderSheet()
    try {
      await api.setStatus(planId, row.subtask_name, next, config.caregiverId)
      el('.card-slot').hidden = true
    } catch (error) {
      row.status = previous // roll back on conflict
      renderSheet()
      if (error instanceof ApiRequestError) {
        toast(
          error.retriable
            ? 'Someone else updated this subtask first; refreshed.'
            : error.message,
        )
      }
      await refresh()
    }
  }

  function openHandover(row: TimesheetRow): void {
    if (!family || !planId) return
    const slot = el('.dialog-slot')
    slot.hidden = false
    renderHandoverDialog(
      slot,
      row,
      family,
      (to) => {
        void submitHandover(api, planId as string, row, to, slot).then(async () => {
          await refresh()
          if (!slot.querySelector('.warnings:not([hidden])')) {
            slot.hidden = true
            slot.innerHTML = ''
          }
        })
      },
      () => {
        slot.hidden = true
        slot.innerHTML = ''
      },
    )
  }

  function openSupport(row: TimesheetRow): void {
    if (!planId) return
    const slot = el('.support-slot')
    slot.hidden = false
    renderSupportPanel(slot, row)
    wireSupportPanel(slot, api, {
      planId,
      familyId: config.familyId,
      caregiverId: config.caregiverId,
      row,
      state: supportState,
      onNoteAdded: () => void refresh(),
    })
  }

  async function refresh(): Promise<void> {
    if (!family) {
      family = await api.getFamily(config.familyId)
      renderProfileEditor(el('.profiles'), family, (caregiverId, tags, notes) => {
        const current = family?.caregivers.find((c) => c.caregiver_id === caregiverId)
        if (!current) return
        void api
          .updateCaregiver(config.familyId, caregiverId, {
            role_label: current.role_label,
            expertise_tags: tags,
            availability: current.availability,
            notes,
          })
          .then((updated) => {
            family = updated.family
            toast(`Saved ${caregiverId} (version ${updated.profile_version})`)
          })
      })
      renderTaskListEditor(el('.task-list'), tasks, (next) => {
        tasks = next
        renderTaskListEditor(el('.task-list'), tasks, () => undefined)
      })
    }
    if (planId) {
      timesheet = await api.getTimesheet(planId)
      report = await api.getReport(planId)
      renderSheet()
      renderDashboard(el('.dashboard-slot'), await api.getEngagement(config.familyId))
    }
  }

  el<HTMLButtonElement>('.generate').addEventListener('click', () => {
    void generatePlan(api, config.familyId, tasks, el('.suggestion-slot'))
      .then(async (plan) => {
        planId = plan.plan_id
        await refresh()
      })
      .catch((error) => toast(String(error)))
  })

  const poller = new Poller(refresh, config.pollMs)

  return {
    api,
    poller,
    refresh,
    setPlan: (id: string) => {
      planId = id
    },
  }
}

// Browser entry point; tests build the app directly via createApp.
export function boot(): void {
  const params = new URLSearchParams(window.location.search)
  const config: AppConfig = {
    baseUrl: params.get('api') ?? localStorage.getItem('famplan.api') ?? '',
    token: params.get('token') ?? localStorage.getItem('famplan.token') ?? '',
    familyId: params.get('family') ?? localStorage.getItem('famplan.family') ?? '',
    caregiverId:
      params.get('caregiver') ?? localStorage.getItem('famplan.caregiver') ?? '',
    pollMs: Number(params.get('poll') ?? 5000),
  }
  const root = document.getElementById('app')
  if (!root) throw new Error('missing #app container')
  if (!config.baseUrl || !config.familyId) {
    root.innerHTML =
      '<p class="connect-help">Open with ?api=&lt;base-url&gt;&amp;token=…' +
      '&amp;family=…&amp;caregiver=… to connect.</p>'
    return
  }
  const app = createApp(root, config)
  app.poller.start()
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  boot()
}
