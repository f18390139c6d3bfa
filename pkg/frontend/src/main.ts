// DOM glue: binds the chat view to the page. All logic lives in state.ts,
// tracepanel.ts and demos.ts, which is what the tests exercise.

import { ServiceClient } from './client.js'
import { DEMO_SCRIPTS, runDemo } from './demos.js'
import { ChatView } from './state.js'
import { renderTrace } from './tracepanel.js'
import type { ChatViewState } from './types.js'

const params = new URLSearchParams(window.location.search)
const baseUrl = params.get('service') ?? 'http://127.0.0.1:8080'

const client = new ServiceClient(baseUrl)
const view = new ChatView(client)

const messagesEl = document.getElementById('messages') as HTMLDivElement
const inputEl = document.getElementById('input') as HTMLInputElement
const sendEl = document.getElementById('send') as HTMLButtonElement
const debugToggleEl = document.getElementById('debug-toggle') as HTMLButtonElement
const tracePanelEl = document.getElementById('trace-panel') as HTMLDivElement
const demosEl = document.getElementById('demos') as HTMLDivElement
const statusEl = document.getElementById('status') as HTMLSpanElement

function render(state: ChatViewState): void {
  messagesEl.innerHTML = ''
  for (const message of state.messages) {
    const bubble = document.createElement('div')
    bubble.className = `bubble ${message.speaker}`
    const text = document.createElement('span')
    text.textContent = message.text
    bubble.appendChild(text)
    if (message.source) {
      const badge = document.createElement('span')
      badge.className = `badge badge-${message.source}`
      badge.textContent = message.source === 'slotfill' ? 'task' : message.source
      bubble.appendChild(badge)
    }
    if (message.retryText) {
      const retry = document.createElement('button')
      retry.textContent = 'retry'
      retry.onclick = () => void view.retry(message.retryText as string)
      bubble.appendChild(retry)
    }
    messagesEl.appendChild(bubble)
  }
  messagesEl.scrollTop = messagesEl.scrollHeight

  sendEl.disabled = !view.canSend(inputEl.value)
  statusEl.textContent = state.pending ? 'thinking…' : state.sessionId ? `session ${state.sessionId}` : 'new session'

  tracePanelEl.style.display = state.debugVisible ? 'block' : 'none'
  if (state.debugVisible) {
    const content = renderTrace(state.lastTrace)
    tracePanelEl.innerHTML = ''
    const title = document.createElement('div')
    title.className = 'trace-title'
    title.textContent = content.title
    tracePanelEl.appendChild(title)
    for (const row of content.rows) {
      const el = document.createElement('div')
      el.className = 'trace-row' + (row.highlight ? ' highlight' : '') + (row.known ? '' : ' unknown')
      el.textContent = `${row.stage}  ${row.summary}`
      tracePanelEl.appendChild(el)
    }
  }
}

view.subscribe(render)

async function submit(): Promise<void> {
  const text = inputEl.value
  if (!view.canSend(text)) return
  inputEl.value = ''
  await view.sendMessage(text)
}

sendEl.onclick = () => void submit()
inputEl.onkeydown = (event) => {
  if (event.key === 'Enter') void submit()
}
inputEl.oninput = () => {
  sendEl.disabled = !view.canSend(inputEl.value)
}
debugToggleEl.onclick = () => view.toggleDebug()

for (const script of DEMO_SCRIPTS) {
  const button = document.createElement('button')
  button.textContent = script.label
  button.onclick = () => void runDemo(view, script)
  demosEl.appendChild(button)
}

void client.healthy().then((ok) => {
  if (!ok) statusEl.textContent = `service unreachable at ${baseUrl}`
})

render(view.getState())
