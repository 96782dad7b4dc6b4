/** Wire types mirrored from the gateway's JSON responses. */

export interface ToolCallWire {
  intent: string;
  params: Record<string, unknown>;
}

export interface ToolPlanWire {
  calls: ToolCallWire[];
  clause_texts: string[];
}

export interface GroundingWire {
  ok: boolean;
  violations: string[];
  checked_numerals: number;
}

export interface ChatRequestBody {
  text: string;
  user_id: string;
  session_id?: string;
  force_language?: string;
}

export interface ChatResponseBody {
  reply: string;
  language: string;
  tool_calls: ToolPlanWire;
  grounding: GroundingWire;
  trace: Record<string, number>;
  session_id: string;
}

export interface ClassificationWire {
  tag: string;
  confidence: number;
  code_mix_ratio: number;
  script_fractions: Record<string, number>;
  script_token_count: number;
  decision_source: string;
}

export interface TurnWire {
  role: "user" | "assistant";
  text: string;
  ts: number;
  latency_breakdown: Record<string, number>;
  classification?: ClassificationWire;
  plan?: ToolPlanWire;
  tool_results_digest?: {
    intents: string[];
    statuses: string[];
    ok: boolean;
    grounding_ok: boolean;
    page_cursor?: unknown;
    screen_params?: unknown;
    fund_ids?: string[];
  };
}

export interface TranscriptBody {
  session_id: string;
  user_id: string;
  last_language: string | null;
  turns: TurnWire[];
}

export interface HealthBody {
  status: string;
  deterministic: boolean;
  funds: number;
}

export type MetricsBody = Record<
  string,
  { count: number; mean_ms: number; p95_ms: number }
>;
