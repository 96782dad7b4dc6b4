/**
 * End-to-end smoke against a real gateway: spawns the Python server in
 * deterministic mode, drives the same client/state code the browser
 * uses, and checks badges, traces, and transcript fidelity over HTTP.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { fileURLToPath } from "node:url";
import path from "node:path";

import { GatewayClient } from "../src/client.js";
import {
  ChatViewState,
  initialState,
  newSession,
  refresh,
  sendMessage,
} from "../src/state.js";

const REPO_ROOT = path.resolve(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "..",
);

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
    srv.on("error", reject);
  });
}

async function waitForHealth(client: GatewayClient, ms: number): Promise<void> {
  const deadline = Date.now() + ms;
  let lastErr: unknown = null;
  while (Date.now() < deadline) {
    try {
      const h = await client.health();
      if (h.status === "ok" && h.deterministic) {
        return;
      }
    } catch (err) {
      lastErr = err;
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`gateway did not come up: ${String(lastErr)}`);
}

let proc: ChildProcess | null = null;
let client: GatewayClient;

beforeAll(async () => {
  const port = await freePort();
  proc = spawn(
    "python3",
    [
      "-m",
      "finlingua.cli",
      "serve",
      "--deterministic",
      "--host",
      "127.0.0.1",
      "--port",
      String(port),
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  proc.on("exit", (code) => {
    if (code !== null && code !== 0) {
      // Surface the server's own error instead of a poll timeout.
      console.error(`gateway exited with ${code}:\n${stderr}`);
    }
  });
  client = new GatewayClient(`http://127.0.0.1:${port}`);
  await waitForHealth(client, 30_000);
}, 40_000);

afterAll(() => {
  proc?.kill("SIGTERM");
});

describe("webchat smoke", () => {
  let view: ChatViewState;

  it(
    "runs a fresh session through both English demo queries and one Hinglish query",
    async () => {
      view = newSession(initialState());
      expect(view.sessionId).toBeNull();

      view = await sendMessage(view, "Tell me about SBI Gold Fund", client);
      expect(view.sessionId).not.toBeNull();
      expect(view.messages).toHaveLength(2);
      expect(view.messages[1]?.badge).toBe("en");
      expect(view.messages[1]?.text).toContain("SBI Gold Fund");

      view = await sendMessage(view, "Find moderate and long term funds", client);
      expect(view.messages).toHaveLength(4);
      expect(view.messages[3]?.badge).toBe("en");

      view = await sendMessage(view, "mera equity exposure kitna hai?", client);
      expect(view.messages).toHaveLength(6);
      expect(view.messages[5]?.badge).toBe("hi_en");

      // Every assistant turn must expose its trace and tool calls.
      const assistants = view.messages.filter((m) => m.role === "assistant");
      expect(assistants).toHaveLength(3);
      for (const m of assistants) {
        expect(Object.keys(m.trace ?? {}).length).toBeGreaterThan(0);
        expect((m.toolCalls ?? []).length).toBeGreaterThan(0);
        expect(m.groundingOk).toBe(true);
      }
    },
    30_000,
  );

  it(
    "reproduces the same message list after a refresh (transcript fidelity)",
    async () => {
      const hydrated = await refresh(view, client);
      expect(hydrated.sessionId).toBe(view.sessionId);
      expect(hydrated.messages.map((m) => [m.role, m.text, m.badge])).toEqual(
        view.messages.map((m) => [m.role, m.text, m.badge]),
      );
      // Traces survive the round trip too (values differ, stages exist).
      for (const m of hydrated.messages.filter((x) => x.role === "assistant")) {
        expect(Object.keys(m.trace ?? {}).length).toBeGreaterThan(0);
      }
    },
    30_000,
  );

  it(
    "new session then \"next\" asks for clarification instead of paging a stale cursor",
    async () => {
      let fresh = newSession(view);
      expect(fresh.sessionId).toBeNull();
      expect(fresh.messages).toEqual([]);

      fresh = await sendMessage(fresh, "Ok, next.", client);
      expect(fresh.sessionId).not.toBe(view.sessionId);
      const assistant = fresh.messages[1];
      expect(assistant?.toolCalls?.[0]?.intent).toBe("continuation");
      expect(assistant?.text).toContain("not sure");
      // No fund listing leaked from the previous session's screen.
      expect(assistant?.text).not.toContain("SBI");
    },
    30_000,
  );
});
