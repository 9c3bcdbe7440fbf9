/**
 * Console shell: one long-poll loop for alerts, one refresh loop for
 * everything else, and mutation handlers that re-fetch on completion.
 */
import { ApiClient, ApiError } from "./api.js";
import type { AlertTicket, ContextGauge, FilterRule, ProxyConfigView } from "./api.js";
import {
  renderAlertInbox,
  renderBanner,
  renderConfigPanel,
  renderContextGauges,
  renderRulesTable,
  renderToast,
} from "./views.js";

const REFRESH_MS = 2000;
const BACKOFF_START_MS = 1000;
const BACKOFF_MAX_MS = 15000;
const TOAST_MS = 4000;

type SlotName = "banner" | "alerts" | "contexts" | "rules" | "config" | "toast";

export class ConsoleApp {
  private backoffMs = BACKOFF_START_MS;
  private stopped = false;
  private slots = new Map<SlotName, HTMLElement>();

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {}

  start(): void {
    this.scaffold();
    void this.alertLoop();
    void this.refreshLoop();
  }

  stop(): void {
    this.stopped = true;
  }

  private scaffold(): void {
    this.root.innerHTML = "";
    const header = document.createElement("header");
    header.innerHTML = "<h1>linkfence console</h1>";
    this.root.append(header);
    const names: SlotName[] = ["banner", "alerts", "contexts", "rules", "config", "toast"];
    for (const name of names) {
      const slot = document.createElement("div");
      slot.className = `slot-${name}`;
      this.slots.set(name, slot);
      this.root.append(slot);
    }
  }

  private swap(name: SlotName, node: HTMLElement | null): void {
    const slot = this.slots.get(name)!;
    slot.innerHTML = "";
    if (node) slot.append(node);
  }

  private toast(message: string): void {
    const node = renderToast(message);
    this.slots.get("toast")!.append(node);
    setTimeout(() => node.remove(), TOAST_MS);
  }

  /** Long-poll /api/alerts; re-poll immediately on every return (with a
   * tiny floor so a degenerate instant response cannot busy-spin). */
  private async alertLoop(): Promise<void> {
    let wait = false; // first call returns at once so the inbox paints fast
    while (!this.stopped) {
      const started = Date.now();
      try {
        const alerts = await this.api.alerts(wait);
        this.backoffMs = BACKOFF_START_MS;
        this.swap("banner", null);
        this.renderAlerts(alerts);
        wait = true;
        const elapsed = Date.now() - started;
        if (elapsed < 100) await sleep(100 - elapsed);
      } catch (err) {
        this.swap("banner", renderBanner(`management API unreachable: ${String(err)}`));
        await sleep(this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
        wait = false;
      }
    }
  }

  private async refreshLoop(): Promise<void> {
    while (!this.stopped) {
      await this.refreshOnce();
      await sleep(REFRESH_MS);
    }
  }

  async refreshOnce(): Promise<void> {
    try {
      const [contexts, rules, config] = await Promise.all([
        this.api.contexts(),
        this.api.rules(),
        this.api.config(),
      ]);
      this.renderContexts(contexts);
      this.renderRules(rules);
      this.renderConfig(config);
    } catch {
      // the alert loop owns the unreachable banner; try again next tick
    }
  }

  renderAlerts(alerts: AlertTicket[]): void {
    this.swap(
      "alerts",
      renderAlertInbox(alerts, (id, action, scope) => void this.decide(id, action, scope)),
    );
  }

  renderContexts(contexts: ContextGauge[]): void {
    this.swap("contexts", renderContextGauges(contexts));
  }

  renderRules(rules: FilterRule[]): void {
    this.swap("rules", renderRulesTable(rules, (id) => void this.deleteRule(id)));
  }

  renderConfig(config: ProxyConfigView): void {
    this.swap("config", renderConfigPanel(config, (bits) => void this.applyThreshold(bits)));
  }

  private async decide(id: string, action: "allow" | "deny", scope: "temporary" | "permanent"): Promise<void> {
    try {
      await this.api.decideAlert(id, action, scope);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.toast("alert was already decided elsewhere");
      } else {
        this.toast(`decision failed: ${String(err)}`);
      }
    }
    // decided tickets leave the inbox on the next poll; nudge it now
    try {
      this.renderAlerts(await this.api.alerts(false));
    } catch {
      /* banner handled by the alert loop */
    }
    await this.refreshOnce();
  }

  private async deleteRule(id: string): Promise<void> {
    try {
      await this.api.deleteRule(id);
    } catch (err) {
      this.toast(`delete failed: ${String(err)}`);
    }
    await this.refreshOnce();
  }

  private async applyThreshold(bits: number): Promise<void> {
    try {
      await this.api.patchConfig({ threshold_bits: bits });
      this.toast(`leakage budget set to ${bits} bits`);
    } catch (err) {
      this.toast(`config update failed: ${String(err)}`);
    }
    await this.refreshOnce();
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const app = new ConsoleApp(root, new ApiClient(""));
  app.start();
}
