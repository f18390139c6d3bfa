// Thin HTTP client for the assistant service; fetch is injected for tests.

import type { HistoryTurn, MessageEnvelope } from './types.js'

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class SessionNotFound extends Error {
  constructor(sessionId: string) {
    super(`unknown session ${sessionId}`)
  }
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async sendMessage(text: string, sessionId: string | null, debug: boolean): Promise<MessageEnvelope> {
    const body: Record<string, string> = { text }
    if (sessionId) body.session_id = sessionId
    const url = `${this.baseUrl}/v1/message${debug ? '?debug=1' : ''}`
    const resp = await this.fetchFn(url, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    if (resp.status === 404) throw new SessionNotFound(sessionId ?? '')
    if (!resp.ok) throw new Error(`service returned ${resp.status}`)
    return (await resp.json()) as MessageEnvelope
  }

  async history(sessionId: string): Promise<HistoryTurn[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/session/${sessionId}`)
    if (resp.status === 404) throw new SessionNotFound(sessionId)
    if (!resp.ok) throw new Error(`service returned ${resp.status}`)
    const doc = (await resp.json()) as { turns: HistoryTurn[] }
    return doc.turns
  }

  async healthy(): Promise<boolean> {
    try {
      const resp = await this.fetchFn(`${this.baseUrl}/healthz`)
      return resp.ok
    } catch {
      return false
    }
  }
}
