import { describe, expect, it } from 'vitest'

import { renderTrace } from '../src/tracepanel.js'
import type { TurnTrace } from '../src/types.js'

function trace(stages: Array<Record<string, unknown> & { stage: string }>): TurnTrace {
  return {
    question: 'q',
    response: { text: 'a', source: stages[stages.length - 1].stage, intent: null, staff_scenario: null },
    stages,
  }
}

describe('renderTrace', () => {
  it('shows trace unavailable when there is none', () => {
    const content = renderTrace(null)
    expect(content.available).toBe(false)
    expect(content.title).toBe('trace unavailable')
    expect(content.rows).toEqual([])
  })

  it('lists stages in order with summaries', () => {
    const content = renderTrace(
      trace([
        { stage: 'intent', label: 'account', top_prob: 0.87 },
        { stage: 'semantic_parse', tags: [['check', 3, 4]] },
        { stage: 'kg', result: 'item', item_id: 'it1' },
      ]),
    )
    expect(content.rows.map((r) => r.stage)).toEqual(['intent', 'semantic_parse', 'kg'])
    expect(content.rows[0].summary).toContain('label=account')
    expect(content.rows[2].summary).toContain('item_id=it1')
    expect(content.rows.every((r) => r.known)).toBe(true)
  })

  it('highlights the clarify stage', () => {
    const content = renderTrace(trace([{ stage: 'kg', result: 'no_answer' }, { stage: 'clarify', node: 'check' }]))
    expect(content.rows[1].highlight).toBe(true)
    expect(content.rows[0].highlight).toBe(false)
  })

  it('flags stage names outside the router vocabulary', () => {
    const content = renderTrace(trace([{ stage: 'mystery' }]))
    expect(content.rows[0].known).toBe(false)
  })
})
