// Plan setup: caregiver profile editor, weekly task list editor, and the
// generate button. After generation the collaboration suggestion and the
// fresh timesheet are shown.

import type { ApiClient } from './api'
import { escapeHtml } from './format'
import type { Family, LearningTask, PlanCreated } from './types'

const TASK_CLASSES = [
  'practice_memorization',
  'homework_qa',
  'habit_state',
  'reflective',
  'physical_music',
]

const SUBJECTS = [
  'chinese', 'math', 'english', 'science', 'music', 'physical', 'art',
  'habits', 'other',
]

export function renderProfileEditor(
  root: HTMLElement,
  family: Family,
  onSave: (caregiverId: string, tags: string[], notes: string) => void,
): void {
  root.innerHTML = family.caregivers
    .map(
      (caregiver) => `
      <fieldset class="profile" data-caregiver="${escapeHtml(caregiver.caregiver_id)}">
        <legend>${escapeHtml(caregiver.caregiver_id)} (${escapeHtml(caregiver.role_label)})</legend>
        <label>Subjects
          <input name="tags" value="${escapeHtml(caregiver.expertise_tags.join(', '))}">
        </label>
        <label>Notes
          <input name="notes" value="${escapeHtml(caregiver.notes)}">
        </label>
        <p class="windows">${caregiver.availability
          .map((w) => `${w.days} ${w.start}–${w.end}`)
          .join('; ') || 'no availability recorded'}</p>
        <button type="button" class="save">save profile</button>
      </fieldset>`,
    )
    .join('')

  for (const fieldset of root.querySelectorAll<HTMLElement>('.profile')) {
    fieldset.querySelector('.save')?.addEventListener('click', () => {
      const tags = (fieldset.querySelector('[name=tags]') as HTMLInputElement).value
        .split(',')
        .map((t) => t.trim())
        .filter(Boolean)
      const notes = (fieldset.querySelector('[name=notes]') as HTMLInputElement).value
      onSave(fieldset.dataset.caregiver ?? '', tags, notes)
    })
  }
}

export function renderTaskListEditor(
  root: HTMLElement,
  tasks: LearningTask[],
  onChange: (tasks: LearningTask[]) => void,
): void {
  const rows = tasks
    .map(
      (t, i) => `
      <tr data-index="${i}">
        <td><input name="task_name" value="${escapeHtml(t.task_name)}"></td>
        <td><select name="subject_tag">${SUBJECTS.map(
          (s) => `<option ${s === t.subject_tag ? 'selected' : ''}>${s}</option>`,
        ).join('')}</select></td>
        <td><select name="task_class">${TASK_CLASSES.map(
          (c) => `<option ${c === t.task_class ? 'selected' : ''}>${c}</option>`,
        ).join('')}</select></td>
        <td><input name="description" value="${escapeHtml(t.description)}"></td>
        <td><button type="button" class="remove">remove</button></td>
      </tr>`,
    )
    .join('')
  root.innerHTML = `
    <table class="task-editor">
      <thead><tr><th>Task</th><th>Subject</th><th>Kind</th><th>Description</th><th></th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
    <button type="button" class="add-task">add task</button>`

  const read = (): LearningTask[] =>
    [...root.querySelectorAll<HTMLTableRowElement>('tbody tr')].map((tr) => ({
      task_name: (tr.querySelector('[name=task_name]') as HTMLInputElement).value,
      subject_tag: (tr.querySelector('[name=subject_tag]') as HTMLSelectElement).value,
      task_class: (tr.querySelector('[name=task_class]') as HTMLSelectElement).value,
      description: (tr.querySelector('[name=description]') as HTMLInputElement).value,
    }))

  root.querySelector('.add-task')?.addEventListener('click', () => {
    onChange([...read(), {
      task_name: '',
      subject_tag: 'other',
      task_class: 'homework_qa',
      description: '',
    }])
  })
  for (const button of root.querySelectorAll<HTMLButtonElement>('.remove')) {
    button.addEventListener('click', () => {
      const index = Number(button.closest('tr')?.dataset.index)
      onChange(read().filter((_, i) => i !== index))
    })
  }
  for (const input of root.querySelectorAll('input, select')) {
    input.addEventListener('change', () => onChange(read()))
  }
}

export async function generatePlan(
  api: ApiClient,
  familyId: string,
  tasks: LearningTask[],
  suggestionRoot: HTMLElement,
): Promise<PlanCreated> {
  const plan = await api.createPlan(familyId, tasks)
  suggestionRoot.innerHTML = `
    <section class="suggestion">
      <h3>Collaboration suggestion</h3>
      <p>${escapeHtml(plan.summary ?? '')}</p>
      ${plan.unplaced.length
        ? `<p class="unplaced">Could not place: ${plan.unplaced
            .map(([name]) => escapeHtml(name))
            .join(', ')}</p>`
        : ''}
    </section>`
  return plan
}
