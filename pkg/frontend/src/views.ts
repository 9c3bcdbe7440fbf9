/**
 * Pure DOM projections of API snapshots. No view keeps state of its own;
 * re-rendering from the latest snapshot is the only update path.
 */
import type {
  AlertTicket,
  ContextGauge,
  FilterRule,
  ProxyConfigView,
  RuleAction,
  RuleScope,
} from "./api.js";

export type DecideHandler = (id: string, action: RuleAction, scope: RuleScope) => void;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderAlertInbox(alerts: AlertTicket[], onDecide: DecideHandler): HTMLElement {
  const panel = el("section", "panel alerts");
  panel.append(el("h2", undefined, "Connection alerts"));
  if (alerts.length === 0) {
    panel.append(el("p", "empty-state", "No pending alerts."));
    return panel;
  }
  for (const ticket of alerts) {
    const row = el("div", "alert-row");
    row.dataset.ticketId = ticket.id;
    const what = el("div", "alert-what");
    what.append(el("code", "alert-url", ticket.request_url));
    what.append(
      el("span", "alert-referrer", ticket.referrer ? `from ${ticket.referrer}` : "no referrer"),
    );
    if (ticket.context_id) {
      what.append(el("span", "alert-context", `context ${ticket.context_id}`));
    }
    row.append(what);

    const controls = el("div", "alert-controls");
    const buttons: Array<[string, RuleAction, RuleScope]> = [
      ["Allow once (this page)", "allow", "temporary"],
      ["Allow always", "allow", "permanent"],
      ["Deny (this page)", "deny", "temporary"],
      ["Deny always", "deny", "permanent"],
    ];
    for (const [label, action, scope] of buttons) {
      const button = el("button", `decide ${action}-${scope}`, label);
      button.addEventListener("click", () => onDecide(ticket.id, action, scope));
      controls.append(button);
    }
    row.append(controls);
    panel.append(row);
  }
  return panel;
}

export function renderRulesTable(rules: FilterRule[], onDelete: (id: string) => void): HTMLElement {
  const panel = el("section", "panel rules");
  panel.append(el("h2", undefined, "Filter rules"));
  const table = el("table", "rules-table");
  const head = el("tr");
  for (const title of ["Pattern", "Kind", "Action", "Lifetime", "Origin", ""]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const rule of rules) {
    const row = el("tr", `rule-row action-${rule.action}`);
    row.dataset.ruleId = rule.id;
    row.append(el("td", "rule-value", rule.pattern.value));
    row.append(el("td", undefined, rule.pattern.kind));
    row.append(el("td", `rule-action`, rule.action));
    row.append(
      el(
        "td",
        undefined,
        rule.lifetime === "temporary" ? `temporary (${rule.context_id ?? "?"})` : "permanent",
      ),
    );
    row.append(el("td", undefined, rule.origin));
    const cell = el("td");
    if (rule.lifetime === "permanent") {
      const remove = el("button", "rule-delete", "delete");
      remove.addEventListener("click", () => onDelete(rule.id));
      cell.append(remove);
    }
    row.append(cell);
    table.append(row);
  }
  panel.append(table);
  return panel;
}

export function renderContextGauges(contexts: ContextGauge[]): HTMLElement {
  const panel = el("section", "panel contexts");
  panel.append(el("h2", undefined, "Page leakage budgets"));
  if (contexts.length === 0) {
    panel.append(el("p", "empty-state", "No live page contexts."));
    return panel;
  }
  for (const ctx of contexts) {
    const atLimit = ctx.bits >= ctx.threshold;
    const gauge = el("div", atLimit ? "gauge at-threshold" : "gauge");
    gauge.dataset.contextId = ctx.context_id;
    gauge.append(el("code", "gauge-page", ctx.page_url));
    // exact API fields, never recomputed here
    gauge.append(el("span", "gauge-links", `links ${ctx.r}/${ctx.n}`));
    gauge.append(el("span", "gauge-bits", `${ctx.bits}/${ctx.threshold} bits`));
    const bar = el("div", "gauge-bar");
    const fill = el("div", "gauge-fill");
    const percent = ctx.threshold > 0 ? Math.min(100, (100 * ctx.bits) / ctx.threshold) : 100;
    fill.style.width = `${percent}%`;
    bar.append(fill);
    gauge.append(bar);
    panel.append(gauge);
  }
  return panel;
}

export function renderConfigPanel(
  config: ProxyConfigView,
  onThreshold: (bits: number) => void,
): HTMLElement {
  const panel = el("section", "panel config");
  panel.append(el("h2", undefined, "Configuration"));
  const list = el("dl", "config-list");
  const entries: Array<[string, string]> = [
    ["proxy", config.listen],
    ["management", config.mgmt_listen],
    ["alert timeout", `${config.alert_timeout_secs} s`],
    ["guard injection", config.inject_enabled ? "on" : "off"],
    ["rules file", config.rules_file ?? "(none)"],
  ];
  for (const [term, value] of entries) {
    list.append(el("dt", undefined, term));
    list.append(el("dd", undefined, value));
  }
  panel.append(list);

  const form = el("div", "threshold-form");
  form.append(el("label", undefined, "leakage budget (bits)"));
  const input = el("input", "threshold-input") as HTMLInputElement;
  input.type = "number";
  input.min = "0";
  input.value = String(config.threshold_bits);
  const apply = el("button", "threshold-apply", "apply");
  apply.addEventListener("click", () => onThreshold(Number(input.value)));
  form.append(input, apply);
  panel.append(form);
  return panel;
}

export function renderBanner(message: string): HTMLElement {
  return el("div", "banner error", message);
}

export function renderToast(message: string): HTMLElement {
  return el("div", "toast", message);
}
