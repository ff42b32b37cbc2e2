import type { Engagement, Family, PlanReport, Timesheet, TimesheetRow } from '../src/types'

export function row(overrides: Partial<TimesheetRow> = {}): TimesheetRow {
  return {
    subtask_name: 'read_1',
    parent_task: 'read',
    description: 'the child reads one chapter aloud',
    answers: null,
    tutoring_method: 'listen and correct slips',
    owners: ['mother'],
    child_participates: true,
    day: 1,
    start: '19:00',
    end: '19:30',
    status: 'pending',
    handover_log: [],
    notes: [],
    ...overrides,
  }
}

export function sheet(rows: TimesheetRow[], summary: string | null = null): Timesheet {
  return { plan_id: 'p1', family_id: 'fam', summary, subtasks: rows }
}

export function family(): Family {
  return {
    family_id: 'fam',
    caregivers: [
      { caregiver_id: 'father', role_label: 'father', expertise_tags: ['math'],
        availability: [{ days: 'weekday', start: '19:00', end: '21:00' }], notes: '' },
      { caregiver_id: 'mother', role_label: 'mother', expertise_tags: ['english'],
        availability: [{ days: 'weekend', start: '09:00', end: '12:00' }], notes: '' },
    ],
    child: { child_id: 'kid', age: 9, grade_level: 3, characteristics: '' },
    independence_required: false,
  }
}

export function report(flagged: string[] = []): PlanReport {
  return {
    plan_id: 'p1',
    overall_mean: flagged.length ? 2.6 : 3,
    scores: [
      {
        dimension: 'actionability',
        score: flagged.length ? 1 : 3,
        findings: flagged.length
          ? [{ rule_id: 'under_duration', severity: 'major', subtasks: flagged,
               explanation: 'too short' }]
          : [],
      },
      { dimension: 'role_task_alignment', score: 3, findings: [] },
      { dimension: 'task_decomposition', score: 3, findings: [] },
      { dimension: 'task_coverage', score: 3, findings: [] },
      { dimension: 'context_awareness', score: 3, findings: [] },
    ],
  }
}

export function engagement(): Engagement {
  return {
    family_id: 'fam',
    caregivers: [
      { caregiver_id: 'mother', tasks_completed: 2, subtasks_executed: 5,
        used_new_example: true, used_answer_checking: false,
        used_tutoring_guidance: true },
      { caregiver_id: 'father', tasks_completed: 1, subtasks_executed: 1,
        used_new_example: false, used_answer_checking: true,
        used_tutoring_guidance: false },
    ],
  }
}
