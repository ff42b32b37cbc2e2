// Individual task support: a chat thread with the assistant, homework photo
// upload for answer checking, one-click practice generation and explanation
// guidance, and the shared notes pane.

import type { ApiClient } from './api'
import { escapeHtml } from './format'
import type { TimesheetRow, TutoringMode } from './types'

export interface SupportPanelState {
  history: [string, string][]
}

export function renderSupportPanel(root: HTMLElement, row: TimesheetRow): void {
  root.innerHTML = `
    <section class="support-panel" data-subtask="${escapeHtml(row.subtask_name)}">
      <h3>Support for ${escapeHtml(row.subtask_name)}</h3>
      <p class="method">${escapeHtml(row.tutoring_method)}</p>
      <div class="chat-thread" aria-live="polite"></div>
      <form class="chat-form">
        <input name="message" placeholder="Ask the assistant" autocomplete="off">
        <button type="submit">send</button>
      </form>
      <div class="tools">
        <label class="upload">check homework photo
          <input type="file" name="photo" accept="image/*" hidden>
        </label>
        <button type="button" class="more-practice">new practice problems</button>
        <button type="button" class="how-to-explain">how to explain this</button>
      </div>
      <section class="notes-pane">
        <h4>Notes</h4>
        <ul class="notes-list">${row.notes
          .map(([who, text]) => `<li><strong>${escapeHtml(who)}</strong>: ${escapeHtml(text)}</li>`)
          .join('')}</ul>
        <form class="note-form">
          <input name="note" placeholder="Leave a note for the other caregivers">
          <button type="submit">add note</button>
        </form>
      </section>
    </section>`
}

export function appendChatLine(root: HTMLElement, role: string, text: string): void {
  const thread = root.querySelector('.chat-thread')
  if (!thread) return
  const line = document.createElement('p')
  line.className = `chat-line ${role}`
  line.textContent = text
  thread.appendChild(line)
}

export function wireSupportPanel(
  root: HTMLElement,
  api: ApiClient,
  options: {
    planId: string
    familyId: string
    caregiverId: string
    row: TimesheetRow
    state: SupportPanelState
    onNoteAdded?: () => void
  },
): void {
  const { planId, familyId, caregiverId, row, state } = options

  const chatForm = root.querySelector<HTMLFormElement>('.chat-form')
  chatForm?.addEventListener('submit', (event) => {
    event.preventDefault()
    const input = chatForm.elements.namedItem('message') as HTMLInputElement
    const text = input.value.trim()
    if (!text) return
    input.value = ''
    appendChatLine(root, 'user', text)
    void api
      .tutoring('dialogue', {
        family_id: familyId,
        caregiver_id: caregiverId,
        text,
        subtask_name: row.subtask_name,
        history: state.history,
      })
      .then((exchange) => {
        state.history.push(['user', text], ['assistant', exchange.response])
        appendChatLine(root, 'assistant', exchange.response)
      })
  })

  const photo = root.querySelector<HTMLInputElement>('[name=photo]')
  photo?.addEventListener('change', () => {
    const file = photo.files?.[0]
    if (!file) return
    const reader = new FileReader()
    reader.onload = () => {
      const dataUrl = String(reader.result)
      const base64 = dataUrl.slice(dataUrl.indexOf(',') + 1)
      void api
        .tutoring('answer_check', {
          family_id: familyId,
          caregiver_id: caregiverId,
          text: '',
          subtask_name: row.subtask_name,
          attachments: [{ media_type: file.type || 'image/png', data_b64: base64 }],
        })
        .then((exchange) => appendChatLine(root, 'assistant', exchange.response))
    }
    reader.readAsDataURL(file)
  })

  const sourceText = () =>
    row.answers ?? `${row.description}\n${row.tutoring_method}`
  const oneShot = (mode: TutoringMode, button: Element | null) => {
    button?.addEventListener('click', () => {
      void api
        .tutoring(mode, {
          family_id: familyId,
          caregiver_id: caregiverId,
          text: sourceText(),
          subtask_name: row.subtask_name,
        })
        .then((exchange) => appendChatLine(root, 'assistant', exchange.response))
    })
  }
  oneShot('transfer_practice', root.querySelector('.more-practice'))
  oneShot('explain_support', root.querySelector('.how-to-explain'))

  const noteForm = root.querySelector<HTMLFormElement>('.note-form')
  noteForm?.addEventListener('submit', (event) => {
    event.preventDefault()
    const input = noteForm.elements.namedItem('note') as HTMLInputElement
    const text = input.value.trim()
    if (!text) return
    input.value = ''
    void api.addNote(planId, row.subtask_name, caregiverId, text).then((result) => {
      const list = root.querySelector('.notes-list')
      if (list) {
        list.innerHTML = result.subtask.notes
          .map(([who, note]) => `<li><strong>${escapeHtml(who)}</strong>: ${escapeHtml(note)}</li>`)
          .join('')
      }
      options.onNoteAdded?.()
    })
  })
}
