// Wire contract of the assistant service (POST /v1/message, GET /v1/session/{id}).

export interface MessageRequest {
  text: string
  session_id?: string
}

export interface MessageEnvelope {
  session_id: string
  reply: string
  source: string
  intent?: string
  trace?: TurnTrace
}

export interface StageRecord {
  stage: string
  [key: string]: unknown
}

export interface TurnTrace {
  question: string
  response: { text: string; source: string; intent: string | null; staff_scenario: string | null }
  stages: StageRecord[]
}

export interface HistoryTurn {
  question: string
  reply: string
  source: string
  timestamp: number
}

// The router's full stage vocabulary; the debug panel must never see a name
// outside this set (contract-tested against a recorded trace fixture).
export const ROUTER_STAGES = [
  'rule',
  'intent',
  'semantic_parse',
  'kg',
  'enrich',
  'clarify',
  'retrieval',
  'chat',
  'slotfill',
  'staff',
] as const

export type RouterStage = (typeof ROUTER_STAGES)[number]

export interface ChatMessage {
  speaker: 'user' | 'assistant' | 'error'
  text: string
  /** source badge for assistant bubbles (rule, kg, slotfill, ...) */
  source?: string
  /** an error bubble the user can retry from */
  retryText?: string
}

export interface ChatViewState {
  sessionId: string | null
  messages: ChatMessage[]
  pending: boolean
  debugVisible: boolean
  lastTrace: TurnTrace | null
}

export function initialState(): ChatViewState {
  return { sessionId: null, messages: [], pending: false, debugVisible: false, lastTrace: null }
}
