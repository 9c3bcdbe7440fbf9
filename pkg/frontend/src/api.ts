/**
 * Typed client for the proxy's management API. The console owns no policy
 * state: everything rendered comes straight from these endpoints.
 */

export type RuleAction = "allow" | "deny";
export type RuleScope = "temporary" | "permanent";

export interface AlertTicket {
  id: string;
  request_url: string;
  referrer: string | null;
  context_id: string | null;
  created_at: string;
  state: "pending" | "decided" | "expired";
  decision_action: RuleAction | null;
  decision_scope: RuleScope | null;
}

export interface RulePattern {
  kind: "exact" | "prefix" | "domain";
  value: string;
}

export interface FilterRule {
  id: string;
  pattern: RulePattern;
  action: RuleAction;
  lifetime: RuleScope;
  context_id: string | null;
  origin: string;
  created_at: string;
}

export interface ContextGauge {
  context_id: string;
  page_url: string;
  n: number;
  r: number;
  bits: number;
  threshold: number;
}

export interface ProxyConfigView {
  listen: string;
  mgmt_listen: string;
  threshold_bits: number;
  alert_timeout_secs: number;
  inject_enabled: boolean;
  max_body_bytes: number;
  nav_heuristic: boolean;
  permanent_deny_overrides: boolean;
  rules_file: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const doc = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) {
      throw new ApiError(resp.status, String(doc["error"] ?? resp.statusText));
    }
    return doc as T;
  }

  /** Pending alerts; wait=true long-polls until one exists (~25 s). */
  async alerts(wait = false): Promise<AlertTicket[]> {
    const query = wait ? "?wait=1" : "";
    const doc = await this.call<{ alerts: AlertTicket[] }>("GET", `/api/alerts${query}`);
    return doc.alerts;
  }

  async decideAlert(id: string, action: RuleAction, scope: RuleScope): Promise<AlertTicket> {
    const doc = await this.call<{ ticket: AlertTicket }>(
      "POST",
      `/api/alerts/${id}/decision`,
      { action, scope },
    );
    return doc.ticket;
  }

  async rules(): Promise<FilterRule[]> {
    return (await this.call<{ rules: FilterRule[] }>("GET", "/api/rules")).rules;
  }

  async createRule(pattern: RulePattern, action: RuleAction): Promise<FilterRule> {
    const doc = await this.call<{ rule: FilterRule }>("POST", "/api/rules", { pattern, action });
    return doc.rule;
  }

  async deleteRule(id: string): Promise<void> {
    await this.call("DELETE", `/api/rules/${id}`);
  }

  async contexts(): Promise<ContextGauge[]> {
    return (await this.call<{ contexts: ContextGauge[] }>("GET", "/api/contexts")).contexts;
  }

  async config(): Promise<ProxyConfigView> {
    return (await this.call<{ config: ProxyConfigView }>("GET", "/api/config")).config;
  }

  async patchConfig(patch: { threshold_bits?: number }): Promise<ProxyConfigView> {
    const doc = await this.call<{ config: ProxyConfigView }>("PATCH", "/api/config", patch);
    return doc.config;
  }
}
