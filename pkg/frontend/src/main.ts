/**
 * DOM wiring. Holds one ChatViewState, re-renders the whole message
 * pane on every transition, and persists the session id so a page
 * refresh rehydrates the transcript from the server.
 */

import { GatewayClient } from "./client.js";
import {
  ChatViewState,
  Message,
  canSend,
  fromTranscript,
  initialState,
  newSession,
  retrySend,
  sendMessage,
} from "./state.js";

const SESSION_KEY = "finlingua.session_id";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    // textContent, never innerHTML: reply text must land verbatim.
    node.textContent = text;
  }
  return node;
}

function renderTrace(msg: Message): HTMLElement | null {
  const calls = msg.toolCalls ?? [];
  const trace = msg.trace ?? {};
  const stages = Object.keys(trace);
  if (calls.length === 0 && stages.length === 0) {
    return null;
  }
  const details = el("details", "trace");
  const label = calls.length === 1 ? "1 tool call" : `${calls.length} tool calls`;
  details.appendChild(el("summary", undefined, label));
  const list = el("ul");
  for (const call of calls) {
    list.appendChild(el("li", "trace-call", `${call.intent} ${JSON.stringify(call.params)}`));
  }
  for (const stage of stages) {
    const ms = trace[stage];
    list.appendChild(el("li", "trace-stage", `${stage}: ${ms?.toFixed(1)} ms`));
  }
  details.appendChild(list);
  return details;
}

export function renderMessages(
  pane: HTMLElement,
  view: ChatViewState,
  onRetry: () => void,
): void {
  pane.replaceChildren();
  for (const msg of view.messages) {
    const bubble = el("div", `msg msg-${msg.role}${msg.error ? " msg-error" : ""}`);
    if (msg.badge) {
      bubble.appendChild(el("span", "badge", msg.badge));
    }
    bubble.appendChild(el("p", "msg-text", msg.text));
    if (msg.pending) {
      bubble.appendChild(el("span", "pending", "…"));
    }
    if (msg.failed) {
      const retry = el("button", "retry", "Retry");
      retry.type = "button";
      retry.addEventListener("click", onRetry);
      bubble.appendChild(retry);
    }
    const trace = renderTrace(msg);
    if (trace) {
      bubble.appendChild(trace);
    }
    pane.appendChild(bubble);
  }
  pane.scrollTop = pane.scrollHeight;
}

interface Dom {
  pane: HTMLElement;
  form: HTMLFormElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  reset: HTMLButtonElement;
  status: HTMLElement;
}

export function mount(dom: Dom, client: GatewayClient): void {
  let view = initialState();

  const apply = (next: ChatViewState) => {
    view = next;
    if (view.sessionId !== null) {
      localStorage.setItem(SESSION_KEY, view.sessionId);
    } else {
      localStorage.removeItem(SESSION_KEY);
    }
    dom.input.value = view.composing;
    const sending = view.status === "sending";
    dom.input.disabled = sending;
    dom.send.disabled = sending;
    dom.status.textContent =
      view.status === "offline" ? "connection lost" : view.status;
    dom.status.className = `status status-${view.status}`;
    renderMessages(dom.pane, view, () => {
      void retrySend(view, client).then(apply);
    });
  };

  dom.form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = dom.input.value;
    if (!canSend(view, text)) {
      return;
    }
    void sendMessage(view, text, client).then(apply);
    // Show the locked composer immediately, not after the round trip.
    apply({ ...view, status: "sending" });
  });

  dom.reset.addEventListener("click", () => {
    apply(newSession(view));
  });

  const saved = localStorage.getItem(SESSION_KEY);
  if (saved) {
    client
      .session(saved)
      .then((transcript) => apply(fromTranscript(transcript)))
      .catch(() => {
        // Session expired or the server restarted; start clean.
        localStorage.removeItem(SESSION_KEY);
        apply(initialState());
      });
  } else {
    apply(view);
  }
}

function boot(): void {
  const $ = (id: string) => document.getElementById(id);
  const pane = $("messages");
  const form = $("composer");
  const input = $("input");
  const send = $("send");
  const reset = $("new-session");
  const status = $("status");
  if (!pane || !form || !input || !send || !reset || !status) {
    throw new Error("chat markup incomplete");
  }
  // Gateway defaults to same origin; override with ?gateway=http://host:port
  // when the page is served separately from the API.
  const params = new URLSearchParams(window.location.search);
  const base = params.get("gateway") ?? window.location.origin;
  mount(
    {
      pane,
      form: form as HTMLFormElement,
      input: input as HTMLInputElement,
      send: send as HTMLButtonElement,
      reset: reset as HTMLButtonElement,
      status,
    },
    new GatewayClient(base),
  );
}

if (typeof document !== "undefined" && document.getElementById("messages")) {
  boot();
}
