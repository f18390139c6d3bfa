// Conversation view state machine.
//
// Messages are append-only; at most one request is in flight per view.  A
// network failure renders a retryable error bubble; a 404 (stale session id,
// e.g. after a server restart) resets the session and retries once.

import { ServiceClient, SessionNotFound } from './client.js'
import type { ChatViewState } from './types.js'
import { initialState } from './types.js'

export type Listener = (state: ChatViewState) => void

export class ChatView {
  private state: ChatViewState = initialState()
  private listeners: Listener[] = []

  constructor(private client: ServiceClient) {}

  getState(): ChatViewState {
    return this.state
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener)
  }

  private update(patch: Partial<ChatViewState>): void {
    this.state = { ...this.state, ...patch }
    for (const listener of this.listeners) listener(this.state)
  }

  canSend(text: string): boolean {
    return text.trim().length > 0 && !this.state.pending
  }

  toggleDebug(): void {
    this.update({ debugVisible: !this.state.debugVisible })
  }

  /** Send one user turn; resolves to the updated state after the reply. */
  async sendMessage(text: string): Promise<ChatViewState> {
    const trimmed = text.trim()
    if (!this.canSend(trimmed)) return this.state

    this.update({
      pending: true,
      messages: [...this.state.messages, { speaker: 'user' as const, text: trimmed }],
    })
    try {
      const envelope = await this.sendWithSessionRecovery(trimmed)
      this.update({
        pending: false,
        sessionId: envelope.session_id,
        lastTrace: envelope.trace ?? null,
        messages: [
          ...this.state.messages,
          { speaker: 'assistant' as const, text: envelope.reply, source: envelope.source },
        ],
      })
    } catch (err) {
      this.update({
        pending: false,
        messages: [
          ...this.state.messages,
          { speaker: 'error' as const, text: `request failed: ${String(err)}`, retryText: trimmed },
        ],
      })
    }
    return this.state
  }

  /** Re-send the text carried by an error bubble. */
  async retry(retryText: string): Promise<ChatViewState> {
    return this.sendMessage(retryText)
  }

  private async sendWithSessionRecovery(text: string) {
    try {
      return await this.client.sendMessage(text, this.state.sessionId, this.state.debugVisible)
    } catch (err) {
      if (err instanceof SessionNotFound && this.state.sessionId) {
        // stale session: drop the id and retry exactly once
        this.update({ sessionId: null })
        return await this.client.sendMessage(text, null, this.state.debugVisible)
      }
      throw err
    }
  }

  /** Server-side turn history for the current session (agreement checks). */
  async serverHistory() {
    if (!this.state.sessionId) return []
    return this.client.history(this.state.sessionId)
  }
}
