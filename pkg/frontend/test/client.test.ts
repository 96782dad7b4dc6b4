import { describe, expect, it } from "vitest";

import { GatewayClient, GatewayHttpError } from "../src/client.js";

interface Recorded {
  url: string;
  init?: RequestInit;
}

function recordingFetch(
  responses: Array<Response | Error>,
): { calls: Recorded[]; fetchImpl: (url: string, init?: RequestInit) => Promise<Response> } {
  const calls: Recorded[] = [];
  let i = 0;
  return {
    calls,
    fetchImpl: async (url, init) => {
      calls.push({ url, init });
      const next = responses[i++];
      if (next === undefined) {
        throw new Error("no scripted response left");
      }
      if (next instanceof Error) {
        throw next;
      }
      return next;
    },
  };
}

function jsonResponse(body: unknown, status = 200, statusText = ""): Response {
  return new Response(JSON.stringify(body), {
    status,
    statusText,
    headers: { "content-type": "application/json" },
  });
}

describe("GatewayClient", () => {
  it("POSTs chat requests as JSON to /v1/chat", async () => {
    const { calls, fetchImpl } = recordingFetch([
      jsonResponse({ reply: "ok", language: "en", tool_calls: { calls: [], clause_texts: [] }, grounding: { ok: true, violations: [], checked_numerals: 0 }, trace: {}, session_id: "s" }),
    ]);
    const client = new GatewayClient("http://127.0.0.1:8000", fetchImpl);
    const resp = await client.chat({ text: "hello", user_id: "webchat" });
    expect(resp.reply).toBe("ok");
    expect(calls[0]?.url).toBe("http://127.0.0.1:8000/v1/chat");
    expect(calls[0]?.init?.method).toBe("POST");
    const headers = calls[0]?.init?.headers as Record<string, string>;
    expect(headers["content-type"]).toBe("application/json");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      text: "hello",
      user_id: "webchat",
    });
  });

  it("normalizes a trailing slash in the base url", async () => {
    const { calls, fetchImpl } = recordingFetch([jsonResponse({ status: "ok" })]);
    const client = new GatewayClient("http://127.0.0.1:8000/", fetchImpl);
    await client.health();
    expect(calls[0]?.url).toBe("http://127.0.0.1:8000/v1/health");
  });

  it("GETs the transcript with the session id url-encoded", async () => {
    const { calls, fetchImpl } = recordingFetch([
      jsonResponse({ session_id: "a b", user_id: "u", last_language: null, turns: [] }),
    ]);
    const client = new GatewayClient("http://h", fetchImpl);
    const t = await client.session("a b");
    expect(calls[0]?.url).toBe("http://h/v1/session/a%20b");
    expect(t.turns).toEqual([]);
  });

  it("fetches metrics keyed by stage", async () => {
    const { fetchImpl } = recordingFetch([
      jsonResponse({ classify: { count: 2, mean_ms: 0.1, p95_ms: 0.2 } }),
    ]);
    const client = new GatewayClient("http://h", fetchImpl);
    const m = await client.metrics();
    expect(m["classify"]?.count).toBe(2);
  });

  it("raises GatewayHttpError with the server's detail on 4xx", async () => {
    const { fetchImpl } = recordingFetch([
      jsonResponse({ detail: "no session 'x'" }, 404, "Not Found"),
    ]);
    const client = new GatewayClient("http://h", fetchImpl);
    const err = await client.session("x").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(GatewayHttpError);
    expect((err as GatewayHttpError).status).toBe(404);
    expect((err as GatewayHttpError).detail).toBe("no session 'x'");
  });

  it("falls back to status text when the error body is not JSON", async () => {
    const { fetchImpl } = recordingFetch([
      new Response("<html>oops</html>", { status: 502, statusText: "Bad Gateway" }),
    ]);
    const client = new GatewayClient("http://h", fetchImpl);
    const err = await client.health().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(GatewayHttpError);
    expect((err as GatewayHttpError).status).toBe(502);
    expect((err as GatewayHttpError).detail).toBe("Bad Gateway");
  });

  it("lets transport failures propagate untyped", async () => {
    const { fetchImpl } = recordingFetch([new TypeError("fetch failed")]);
    const client = new GatewayClient("http://h", fetchImpl);
    const err = await client.health().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(TypeError);
    expect(err).not.toBeInstanceOf(GatewayHttpError);
  });
});
