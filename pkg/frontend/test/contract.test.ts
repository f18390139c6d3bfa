// Contract checks against the recorded trace fixture produced by the
// service-side golden suite: the debug panel's stage vocabulary must cover
// everything the router can emit.

import { readFileSync } from 'node:fs'
import { dirname, join } from 'node:path'
import { fileURLToPath } from 'node:url'

import { describe, expect, it } from 'vitest'

import { renderTrace } from '../src/tracepanel.js'
import type { TurnTrace } from '../src/types.js'
import { ROUTER_STAGES } from '../src/types.js'

const here = dirname(fileURLToPath(import.meta.url))
const fixturePath = join(here, '..', '..', 'tests', 'data', 'golden_traces.json')

interface FixtureRecord extends TurnTrace {
  session: string
}

const records: FixtureRecord[] = JSON.parse(readFileSync(fixturePath, 'utf-8'))

describe('recorded trace fixture', () => {
  it('every recorded stage name is in the router vocabulary', () => {
    const known = new Set<string>(ROUTER_STAGES)
    for (const record of records) {
      for (const stage of record.stages) {
        expect(known.has(stage.stage), `unknown stage ${stage.stage}`).toBe(true)
      }
    }
  })

  it('panel rows mark every recorded stage as known', () => {
    for (const record of records) {
      const content = renderTrace(record)
      expect(content.available).toBe(true)
      expect(content.rows.every((r) => r.known)).toBe(true)
      expect(content.rows.map((r) => r.stage)).toEqual(record.stages.map((s) => s.stage))
    }
  })

  it('kg-answer turns list semantic_parse before kg', () => {
    const kgTurns = records.filter((r) => r.response.source === 'kg')
    expect(kgTurns.length).toBeGreaterThan(0)
    for (const record of kgTurns) {
      const stages = record.stages.map((s) => s.stage)
      expect(stages.indexOf('semantic_parse')).toBeGreaterThanOrEqual(0)
      expect(stages.indexOf('semantic_parse')).toBeLessThan(stages.indexOf('kg'))
    }
  })

  it('rule-hit promo turns short-circuit to a single rule stage', () => {
    const promoTurn = records.find((r) => r.response.source === 'rule')
    expect(promoTurn).toBeDefined()
    expect(promoTurn!.stages.map((s) => s.stage)).toEqual(['rule'])
  })

  it('clarify turns highlight the single tagged node', () => {
    const clarifyTurn = records.find((r) => r.response.source === 'clarify')
    expect(clarifyTurn).toBeDefined()
    const content = renderTrace(clarifyTurn!)
    const row = content.rows[content.rows.length - 1]
    expect(row.stage).toBe('clarify')
    expect(row.highlight).toBe(true)
    expect(row.summary).toContain('node=')
  })
})
