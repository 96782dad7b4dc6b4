/**
 * View state for the chat screen, kept as plain data plus pure
 * transition functions. The DOM layer renders whatever state says and
 * never invents content: reply text and language badges are taken from
 * the server verbatim, numbers included, so a Devanagari numeral or an
 * Indian-format "1,23,456" lands on screen exactly as generated.
 *
 * Invariants the transitions preserve:
 *  - messages mirror the server transcript order
 *  - every assistant message carries a language badge
 *  - at most one send is in flight (composer locks while sending)
 *  - a transport failure keeps the user's message with a retry
 *    affordance; an HTTP rejection keeps the composer text instead
 */

import { GatewayClient, GatewayHttpError } from "./client.js";
import type { ChatResponseBody, ToolCallWire, TranscriptBody } from "./types.js";

export type ConnectionStatus = "idle" | "sending" | "offline";

export interface Message {
  role: "user" | "assistant";
  /** Server text verbatim; the UI must not reformat it. */
  text: string;
  /** Language tag as the server reported it (absent on error bubbles). */
  badge?: string;
  /** Per-stage latency in ms, shown collapsed under the message. */
  trace?: Record<string, number>;
  toolCalls?: ToolCallWire[];
  groundingOk?: boolean;
  /** Awaiting the server's reply. */
  pending?: boolean;
  /** Transport failure; offered for retry, text kept. */
  failed?: boolean;
  /** Local error bubble for a server rejection. */
  error?: boolean;
}

export interface ChatViewState {
  /** Null until the server assigns one on the first reply. */
  sessionId: string | null;
  messages: Message[];
  composing: string;
  status: ConnectionStatus;
  userId: string;
}

export function initialState(userId = "webchat"): ChatViewState {
  return {
    sessionId: null,
    messages: [],
    composing: "",
    status: "idle",
    userId,
  };
}

export function canSend(view: ChatViewState, text: string): boolean {
  return text.trim().length > 0 && view.status !== "sending";
}

/** Append the optimistic user turn and lock the composer. */
export function beginSend(view: ChatViewState, text: string): ChatViewState {
  if (!canSend(view, text)) {
    return view;
  }
  return {
    ...view,
    messages: [...view.messages, { role: "user", text, pending: true }],
    composing: "",
    status: "sending",
  };
}

function lastIndexWhere(
  messages: Message[],
  pred: (m: Message) => boolean,
): number {
  for (let i = messages.length - 1; i >= 0; i--) {
    const m = messages[i];
    if (m !== undefined && pred(m)) {
      return i;
    }
  }
  return -1;
}

/**
 * Settle the in-flight user turn and append the assistant reply. The
 * badge comes from ChatResponse.language and the session id is adopted
 * from the server (it assigns one when the request carried none).
 */
export function applyReply(
  view: ChatViewState,
  reply: ChatResponseBody,
): ChatViewState {
  const pendingIdx = lastIndexWhere(view.messages, (m) => m.pending === true);
  const messages = view.messages.map((m, i) =>
    i === pendingIdx ? { ...m, pending: false, badge: reply.language } : m,
  );
  messages.push({
    role: "assistant",
    text: reply.reply,
    badge: reply.language,
    trace: reply.trace,
    toolCalls: reply.tool_calls.calls,
    groundingOk: reply.grounding.ok,
  });
  return { ...view, messages, sessionId: reply.session_id, status: "idle" };
}

/** Transport failure: keep the message, mark it for retry. */
export function applyNetworkFailure(view: ChatViewState): ChatViewState {
  const pendingIdx = lastIndexWhere(view.messages, (m) => m.pending === true);
  const messages = view.messages.map((m, i) =>
    i === pendingIdx ? { ...m, pending: false, failed: true } : m,
  );
  return { ...view, messages, status: "offline" };
}

/**
 * Server rejection (4xx): drop the optimistic turn, show an error
 * bubble, and put the text back in the composer so nothing is lost.
 */
export function applyHttpFailure(
  view: ChatViewState,
  detail: string,
): ChatViewState {
  const pendingIdx = lastIndexWhere(view.messages, (m) => m.pending === true);
  const restored =
    pendingIdx >= 0 ? (view.messages[pendingIdx]?.text ?? "") : "";
  const messages = view.messages.filter((_, i) => i !== pendingIdx);
  messages.push({ role: "assistant", text: detail, error: true });
  return { ...view, messages, composing: restored, status: "idle" };
}

/**
 * Clear the conversation and drop the session id; the server assigns a
 * fresh one on the next send. Safe to call twice in a row.
 */
export function newSession(view: ChatViewState): ChatViewState {
  if (view.status === "sending") {
    return view;
  }
  return { ...initialState(view.userId), composing: view.composing };
}

/**
 * Rebuild the view from a server transcript so a page refresh shows
 * the same message list. Assistant turns are stored server-side
 * without a classification, so their badge is the tag of the user
 * turn they answered.
 */
export function fromTranscript(
  transcript: TranscriptBody,
  userId = "webchat",
): ChatViewState {
  const messages: Message[] = [];
  let lastUserTag: string | undefined;
  for (const turn of transcript.turns) {
    if (turn.role === "user") {
      lastUserTag = turn.classification?.tag;
      messages.push({ role: "user", text: turn.text, badge: lastUserTag });
    } else {
      messages.push({
        role: "assistant",
        text: turn.text,
        badge: lastUserTag ?? transcript.last_language ?? "unknown",
        trace: turn.latency_breakdown,
        toolCalls: turn.plan?.calls,
        groundingOk: turn.tool_results_digest?.grounding_ok,
      });
    }
  }
  return {
    sessionId: transcript.session_id,
    messages,
    composing: "",
    status: "idle",
    userId: transcript.user_id || userId,
  };
}

/** One round trip: optimistic turn, POST, settle. */
export async function sendMessage(
  view: ChatViewState,
  text: string,
  client: GatewayClient,
): Promise<ChatViewState> {
  if (!canSend(view, text)) {
    return view;
  }
  const sending = beginSend(view, text);
  return settle(sending, text, client);
}

/** Re-issue the last transport-failed message without duplicating it. */
export async function retrySend(
  view: ChatViewState,
  client: GatewayClient,
): Promise<ChatViewState> {
  if (view.status === "sending") {
    return view;
  }
  const idx = lastIndexWhere(
    view.messages,
    (m) => m.role === "user" && m.failed === true,
  );
  const msg = idx >= 0 ? view.messages[idx] : undefined;
  if (msg === undefined) {
    return view;
  }
  const sending: ChatViewState = {
    ...view,
    status: "sending",
    messages: view.messages.map((m, i) =>
      i === idx ? { ...m, failed: false, pending: true } : m,
    ),
  };
  return settle(sending, msg.text, client);
}

async function settle(
  sending: ChatViewState,
  text: string,
  client: GatewayClient,
): Promise<ChatViewState> {
  try {
    const reply = await client.chat({
      text,
      user_id: sending.userId,
      ...(sending.sessionId !== null ? { session_id: sending.sessionId } : {}),
    });
    return applyReply(sending, reply);
  } catch (err) {
    if (err instanceof GatewayHttpError && err.status < 500) {
      return applyHttpFailure(sending, err.detail);
    }
    return applyNetworkFailure(sending);
  }
}

/** Reload the transcript for the current session, if any. */
export async function refresh(
  view: ChatViewState,
  client: GatewayClient,
): Promise<ChatViewState> {
  if (view.sessionId === null) {
    return view;
  }
  const transcript = await client.session(view.sessionId);
  return fromTranscript(transcript, view.userId);
}
