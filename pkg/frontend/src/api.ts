// Typed client for the coordination API. Every request goes through one
// door and is recorded in the audit trail, which the end-to-end tests use
// to prove the UI only ever touches documented endpoints.

import type {
  ApiError,
  Engagement,
  Exchange,
  Family,
  HandoverResult,
  LearningTask,
  PlanCreated,
  PlanReport,
  SubtaskState,
  Status,
  Timesheet,
  TutoringMode,
} from './types'

export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiError,
  ) {
    super(`${body.code}: ${body.message}`)
  }

  get retriable(): boolean {
    return this.body.code === 'transition_conflict'
  }
}

export interface AuditEntry {
  method: string
  path: string
}

export class ApiClient {
  readonly audit: AuditEntry[] = []

  constructor(
    private readonly baseUrl: string,
    private token: string = '',
  ) {}

  setToken(token: string): void {
    this.token = token
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.audit.push({ method, path })
    const headers: Record<string, string> = { 'Content-Type': 'application/json' }
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    })
    const payload = await response.json()
    if (!response.ok) {
      throw new ApiRequestError(response.status, payload as ApiError)
    }
    return payload as T
  }

  createFamily(family: Family): Promise<{ family: Family; token: string }> {
    return this.request('POST', '/families', family)
  }

  getFamily(familyId: string): Promise<Family> {
    return this.request('GET', `/families/${familyId}`)
  }

  updateCaregiver(
    familyId: string,
    caregiverId: string,
    body: Omit<Family['caregivers'][number], 'caregiver_id'>,
  ): Promise<{ family: Family; profile_version: number }> {
    return this.request('PUT', `/families/${familyId}/caregivers/${caregiverId}`, body)
  }

  createPlan(
    familyId: string,
    tasks: LearningTask[],
    policy = 'deterministic_only',
  ): Promise<PlanCreated> {
    return this.request('POST', `/families/${familyId}/plans`, { tasks, policy })
  }

  getTimesheet(planId: string): Promise<Timesheet> {
    return this.request('GET', `/plans/${planId}/timesheet`)
  }

  getReport(planId: string): Promise<PlanReport> {
    return this.request('GET', `/plans/${planId}/report`)
  }

  setStatus(
    planId: string,
    subtaskName: string,
    status: Status,
    caregiverId: string,
    actingAs?: string,
  ): Promise<{ subtask: SubtaskState }> {
    return this.request('POST', `/plans/${planId}/subtasks/${subtaskName}/status`, {
      status,
      caregiver_id: caregiverId,
      acting_as: actingAs,
    })
  }

  handover(
    planId: string,
    subtaskName: string,
    from: string,
    to: string,
  ): Promise<HandoverResult> {
    return this.request('POST', `/plans/${planId}/subtasks/${subtaskName}/handover`, {
      from,
      to,
    })
  }

  addNote(
    planId: string,
    subtaskName: string,
    caregiverId: string,
    text: string,
  ): Promise<{ subtask: SubtaskState }> {
    return this.request('POST', `/plans/${planId}/subtasks/${subtaskName}/notes`, {
      caregiver_id: caregiverId,
      text,
    })
  }

  tutoring(
    mode: TutoringMode,
    body: {
      family_id: string
      caregiver_id: string
      text?: string
      subtask_name?: string | null
      attachments?: { media_type: string; data_b64: string }[]
      history?: [string, string][]
    },
  ): Promise<Exchange> {
    return this.request('POST', `/tutoring/${mode}`, body)
  }

  getEngagement(familyId: string): Promise<Engagement> {
    return this.request('GET', `/families/${familyId}/engagement`)
  }
}

// The complete surface the UI is allowed to touch; the e2e audit asserts
// every recorded call matches one of these.
export const DOCUMENTED_ENDPOINTS: { method: string; pattern: RegExp }[] = [
  { method: 'POST', pattern: /^\/families$/ },
  { method: 'GET', pattern: /^\/families\/[^/]+$/ },
  { method: 'PUT', pattern: /^\/families\/[^/]+\/caregivers\/[^/]+$/ },
  { method: 'POST', pattern: /^\/families\/[^/]+\/plans$/ },
  { method: 'GET', pattern: /^\/plans\/[^/]+\/timesheet$/ },
  { method: 'GET', pattern: /^\/plans\/[^/]+\/report$/ },
  { method: 'POST', pattern: /^\/plans\/[^/]+\/subtasks\/[^/]+\/handover$/ },
  { method: 'POST', pattern: /^\/plans\/[^/]+\/subtasks\/[^/]+\/status$/ },
  { method: 'POST', pattern: /^\/plans\/[^/]+\/subtasks\/[^/]+\/notes$/ },
  { method: 'POST', pattern: /^\/tutoring\/[^/]+$/ },
  { method: 'GET', pattern: /^\/families\/[^/]+\/engagement$/ },
]

export function auditViolations(audit: AuditEntry[]): AuditEntry[] {
  return audit.filter(
    (entry) =>
      !DOCUMENTED_ENDPOINTS.some(
        (doc) => doc.method === entry.method && doc.pattern.test(entry.path),
      ),
  )
}
