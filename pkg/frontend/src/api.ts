/**
 * Typed client for the audit service.
 *
 * The console never computes statistics: every number rendered anywhere
 * comes out of one of these responses, parsed from the service's JSON and
 * passed through untouched.
 */

export interface ContestPayload {
  name: string;
  tallies: Record<string, number>;
  total_ballots: number;
}

export interface ContestCreated {
  contest_id: string;
  contest: ContestPayload & { winner: string; loser: string };
}

export interface AuditSpec {
  contest_id: string;
  rule: string;
  alpha: number;
  delta: number;
  schedule: number[];
}

export interface RoundRow {
  round: number;
  n: number;
  draws: number;
  winner_relevant: number;
  loser_relevant: number;
  irrelevant: number;
  k_cumulative: number;
  kmin: number;
  ratio: number | string;
  p_value_analog: number | string;
  decision: "correct" | "undetermined";
  stop_prob: number;
  risk: number;
}

export interface AuditStatus {
  schema_version: number;
  audit_id: string;
  contest_id: string;
  contest: ContestCreated["contest"];
  config: { alpha: number; delta: number; p: number; rule: string };
  schedule: { sizes: number[]; version: number; amended_from: number[] | null };
  status: string;
  rounds_executed: number;
  relevant_drawn: number;
  rounds: RoundRow[];
  cum_risk: number;
  cum_stop: number;
  risk_budget: { alpha: number; spent: number; fraction_spent: number };
  content_hash: string;
}

export interface RoundPost {
  draws: number;
  winner: number;
  loser: number;
  irrelevant: number;
  expected_rounds: number;
  amend?: boolean;
}

export interface RoundResult {
  schema_version: number;
  audit_id: string;
  evaluation: {
    kmin: number;
    ratio_at_k: number | string;
    sigma_at_k: number | string;
    decision: "correct" | "undetermined";
    p_value_analog: number | string;
  };
  status: string;
  rounds_executed: number;
  cum_risk: number;
  cum_stop: number;
  schedule_version: number;
}

export interface NextRound {
  schema_version: number;
  audit_id: string;
  target: number;
  relevant_round_size: number;
  scaled_draws: number;
  expected_distinct: number;
  achieved_stop_prob: number;
  method: string;
}

export interface WhatIf {
  schema_version: number;
  audit_id: string;
  n: number;
  kmin: number;
  stop_prob: number;
  conditional_stop_prob: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = (await resp.json()) as T & { error?: string };
  if (!resp.ok) {
    throw new ApiError(resp.status, body.error ?? `HTTP ${resp.status}`);
  }
  return body;
}

function post<T>(url: string, payload: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export class AuditApi {
  constructor(readonly base: string) {}

  createContest(payload: ContestPayload): Promise<ContestCreated> {
    return post(`${this.base}/contests`, payload);
  }

  createAudit(spec: AuditSpec): Promise<AuditStatus> {
    return post(`${this.base}/audits`, spec);
  }

  getAudit(auditId: string): Promise<AuditStatus> {
    return request(`${this.base}/audits/${auditId}`);
  }

  postRound(auditId: string, round: RoundPost): Promise<RoundResult> {
    return post(`${this.base}/audits/${auditId}/rounds`, round);
  }

  nextRound(auditId: string, target: number): Promise<NextRound> {
    return request(`${this.base}/audits/${auditId}/next-round?target=${target}`);
  }

  whatIf(auditId: string, n: number): Promise<WhatIf> {
    return request(`${this.base}/audits/${auditId}/whatif?n=${n}`);
  }

  escalate(auditId: string): Promise<{ status: string }> {
    return post(`${this.base}/audits/${auditId}/escalate`, {});
  }
}
