// Wire types mirroring the coordination API's published JSON schemas.

export type Status = 'pending' | 'in_progress' | 'done'

export type TutoringMode =
  | 'dialogue'
  | 'answer_check'
  | 'transfer_practice'
  | 'explain_support'

export interface AvailabilityWindow {
  days: 'weekday' | 'weekend' | number
  start: string
  end: string
}

export interface Caregiver {
  caregiver_id: string
  role_label: string
  expertise_tags: string[]
  availability: AvailabilityWindow[]
  notes: string
}

export interface Child {
  child_id: string
  age: number
  grade_level: number
  characteristics: string
}

export interface Family {
  family_id: string
  caregivers: Caregiver[]
  child: Child
  independence_required: boolean
}

export interface LearningTask {
  task_name: string
  description: string
  subject_tag: string
  task_class: string
}

export interface TimesheetRow {
  subtask_name: string
  parent_task: string
  description: string
  answers: string | null
  tutoring_method: string
  owners: string[]
  child_participates: boolean
  day: number
  start: string
  end: string
  status: Status
  handover_log: [string, string, number][]
  notes: [string, string, number][]
}

export interface Timesheet {
  plan_id: string
  family_id: string
  summary: string | null
  subtasks: TimesheetRow[]
}

export interface Finding {
  rule_id: string
  severity: 'minor' | 'major'
  subtasks: string[]
  explanation: string
}

export interface DimensionScore {
  dimension: string
  score: number
  findings: Finding[]
}

export interface PlanReport {
  plan_id: string
  scores: DimensionScore[]
  overall_mean: number
}

export interface PlanCreated {
  plan_id: string
  family_id: string
  version: number
  parent_plan_id: string | null
  schedule: { subtasks: unknown[] }
  report: PlanReport
  summary: string | null
  unplaced: [string, string][]
}

export interface EngagementRow {
  caregiver_id: string
  tasks_completed: number
  subtasks_executed: number
  used_new_example: boolean
  used_answer_checking: boolean
  used_tutoring_guidance: boolean
}

export interface Engagement {
  family_id: string
  caregivers: EngagementRow[]
}

export interface SubtaskState {
  subtask_name: string
  status: Status
  owners: string[]
  handover_log: [string, string, number][]
  notes: [string, string, number][]
}

export interface HandoverResult {
  subtask: SubtaskState
  warnings: { kind: string; subtasks: string[]; detail: string }[]
}

export interface Exchange {
  exchange_id: string
  caregiver_id: string
  mode: TutoringMode
  subtask_name: string | null
  request_text: string
  attachments: { media_type: string; bytes: number }[]
  response: string
  timestamp: number
}

export interface ApiError {
  code: string
  message: string
  details: unknown[]
}
