// Debug panel content: the per-stage routing trace of the last turn.

import type { StageRecord, TurnTrace } from './types.js'
import { ROUTER_STAGES } from './types.js'

export interface TraceRow {
  stage: string
  known: boolean
  summary: string
  highlight: boolean
}

export interface TracePanelContent {
  available: boolean
  title: string
  rows: TraceRow[]
}

function summarize(record: StageRecord): string {
  const parts: string[] = []
  for (const [key, value] of Object.entries(record)) {
    if (key === 'stage') continue
    parts.push(`${key}=${typeof value === 'string' ? value : JSON.stringify(value)}`)
  }
  return parts.join('  ')
}

export function renderTrace(trace: TurnTrace | null): TracePanelContent {
  if (!trace) {
    return { available: false, title: 'trace unavailable', rows: [] }
  }
  const known = new Set<string>(ROUTER_STAGES)
  return {
    available: true,
    title: `route for: ${trace.question}`,
    rows: trace.stages.map((record) => ({
      stage: record.stage,
      known: known.has(record.stage),
      summary: summarize(record),
      // the clarify stage names the single tagged node that triggered it
      highlight: record.stage === 'clarify',
    })),
  }
}
