// Display helpers. All times stay in the wire's 24-hour HH:MM form.

const HHMM = /^([01]\d|2[0-3]):[0-5]\d$/

export function isWireTime(text: string): boolean {
  return HHMM.test(text)
}

export function timeRange(start: string, end: string): string {
  return `${start}–${end}`
}

export const DAY_LABELS = ['Day 1', 'Day 2', 'Day 3', 'Day 4', 'Day 5', 'Day 6', 'Day 7']

// Color-blind-safe owner palette; assignment is stable by sorted owner id so
// the same caregiver keeps their color across views.
const OWNER_PALETTE = [
  '#4e79a7', '#f28e2b', '#59a14f', '#b07aa1', '#e15759', '#76b7b2',
]

export function ownerColors(ownerIds: string[]): Map<string, string> {
  const colors = new Map<string, string>()
  for (const [index, id] of [...ownerIds].sort().entries()) {
    colors.set(id, OWNER_PALETTE[index % OWNER_PALETTE.length])
  }
  return colors
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;')
}

export function statusLabel(status: string): string {
  return status === 'in_progress' ? 'in progress' : status
}
