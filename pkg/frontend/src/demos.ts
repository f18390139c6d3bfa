// One-click scripted demos: canned user turns replayed through the view.

import type { ChatView } from './state.js'

export interface DemoScript {
  id: string
  label: string
  turns: string[]
}

export const DEMO_SCRIPTS: DemoScript[] = [
  {
    id: 'assistance',
    label: 'book a flight (assistance)',
    turns: ['i want to book a flight ticket', 'from hangzhou to beijing', 'tomorrow'],
  },
  {
    id: 'customer_service',
    label: 'account question (customer service)',
    turns: ['i want to check', 'taobao account'],
  },
  {
    id: 'chatting',
    label: 'small talk (chatting)',
    turns: ['i am unhappy', 'hello there', 'tell me a joke'],
  },
]

/** Replay a script turn by turn; stops early if a turn errors out. */
export async function runDemo(view: ChatView, script: DemoScript): Promise<boolean> {
  for (const turn of script.turns) {
    const state = await view.sendMessage(turn)
    const last = state.messages[state.messages.length - 1]
    if (!last || last.speaker === 'error') return false
  }
  return true
}
