/**
 * Live-audit console.
 *
 * One coordinator, one audit at a time: create the audit, enter each
 * round's tallies as they are counted, read the stop/continue/escalate
 * decision and the risk budget, and project next-round sizes before
 * committing to a draw.  The console holds no statistical logic; it is a
 * rendering of API responses, so it can never disagree with the engine of
 * record.
 */

import { ApiError, AuditApi, AuditStatus, RoundResult } from "./api.js";
import { clear, el, raw } from "./dom.js";

const RULES = ["minerva", "athena", "eor-bravo", "b2-bravo"];

export class ConsoleApp {
  private api: AuditApi;
  private auditId: string | null = null;
  private status: AuditStatus | null = null;
  private root: HTMLElement;

  constructor(root: HTMLElement, apiBase: string) {
    this.root = root;
    this.api = new AuditApi(apiBase);
  }

  mount(): void {
    clear(this.root);
    this.root.append(this.setupPanel());
  }

  /** Attach to an existing audit (e.g. after a page reload). */
  async open(auditId: string): Promise<void> {
    this.auditId = auditId;
    this.status = await this.api.getAudit(auditId);
    this.renderSession();
  }

  // ---------------------------------------------------------------- setup

  private setupPanel(): HTMLElement {
    const name = el("input", { id: "contest-name", value: "Demo contest" });
    const winnerName = el("input", { id: "cand-a-name", value: "A" });
    const winnerVotes = el("input", { id: "cand-a-votes", type: "number", value: 7500 });
    const loserName = el("input", { id: "cand-b-name", value: "B" });
    const loserVotes = el("input", { id: "cand-b-votes", type: "number", value: 2500 });
    const total = el("input", { id: "total-ballots", type: "number", value: 10000 });
    const rule = el("select", { id: "rule" });
    for (const r of RULES) rule.append(el("option", { value: r }, r));
    const alpha = el("input", { id: "alpha", type: "number", step: "0.01", value: "0.1" });
    const delta = el("input", { id: "delta", type: "number", step: "0.1", value: "1" });
    const schedule = el("input", { id: "schedule", value: "50,100" });
    const error = el("p", { class: "error", id: "setup-error" });

    const create = async () => {
      error.textContent = "";
      try {
        const contest = await this.api.createContest({
          name: name.value,
          tallies: {
            [winnerName.value]: Number(winnerVotes.value),
            [loserName.value]: Number(loserVotes.value),
          },
          total_ballots: Number(total.value),
        });
        const audit = await this.api.createAudit({
          contest_id: contest.contest_id,
          rule: rule.value,
          alpha: Number(alpha.value),
          delta: Number(delta.value),
          schedule: schedule.value.split(",").map((s) => Number(s.trim())),
        });
        this.auditId = audit.audit_id;
        this.status = audit;
        this.renderSession();
      } catch (exc) {
        error.textContent = exc instanceof Error ? exc.message : String(exc);
      }
    };

    return el(
      "section",
      { id: "setup", class: "panel" },
      el("h2", {}, "New audit"),
      labelled("Contest name", name),
      labelled("Announced winner / votes", winnerName, winnerVotes),
      labelled("Announced runner-up / votes", loserName, loserVotes),
      labelled("Total ballots cast", total),
      labelled("Rule", rule),
      labelled("Risk limit α", alpha),
      labelled("δ (combined rule)", delta),
      labelled("Round schedule (cumulative relevant draws)", schedule),
      el("button", { id: "create-audit", onclick: create }, "Create audit"),
      error,
    );
  }

  // -------------------------------------------------------------- session

  private renderSession(): void {
    const st = this.status;
    if (!st) return;
    clear(this.root);
    this.root.append(
      this.headerPanel(st),
      this.roundsPanel(st),
      this.riskPanel(st),
      this.decisionPanel(st),
      this.entryPanel(st),
      this.whatifPanel(),
    );
  }

  private async refresh(): Promise<void> {
    if (!this.auditId) return;
    this.status = await this.api.getAudit(this.auditId);
    this.renderSession();
  }

  private headerPanel(st: AuditStatus): HTMLElement {
    const c = st.contest;
    const amended =
      st.schedule.version > 0
        ? el(
            "p",
            { class: "warning", id: "schedule-warning" },
            `schedule amended (version ${st.schedule.version}; originally ` +
              `${(st.schedule.amended_from ?? []).join(", ")}) — ` +
              "pre-determined-schedule guarantees no longer apply as stated",
          )
        : null;
    return el(
      "section",
      { class: "panel", id: "header" },
      el("h2", {}, `${c.name} — audit ${st.audit_id}`),
      el(
        "p",
        {},
        `${c.winner} vs ${c.loser}; rule ${st.config.rule}, α=${raw(st.config.alpha)}, ` +
          `δ=${raw(st.config.delta)}, announced winner fraction p=${raw(st.config.p)}`,
      ),
      el("p", {}, `schedule: ${st.schedule.sizes.join(", ")} (relevant ballots, cumulative)`),
      amended,
    );
  }

  private roundsPanel(st: AuditStatus): HTMLElement {
    const head = el(
      "tr",
      {},
      ...["round", "n", "k", "kmin", "ratio", "p-value analog", "decision"].map((h) =>
        el("th", {}, h),
      ),
    );
    const body = st.rounds.map((r) =>
      el(
        "tr",
        { class: `round-row ${r.decision}` },
        el("td", {}, raw(r.round)),
        el("td", { class: "cell-n" }, raw(r.n)),
        el("td", { class: "cell-k" }, raw(r.k_cumulative)),
        el("td", { class: "cell-kmin" }, raw(r.kmin)),
        el("td", { class: "cell-ratio" }, raw(r.ratio)),
        el("td", { class: "cell-pvalue" }, raw(r.p_value_analog)),
        el("td", { class: "cell-decision" }, r.decision),
      ),
    );
    return el(
      "section",
      { class: "panel", id: "rounds" },
      el("h3", {}, "Rounds"),
      st.rounds.length
        ? el("table", { id: "round-table" }, head, ...body)
        : el("p", {}, "no rounds entered yet"),
    );
  }

  private riskPanel(st: AuditStatus): HTMLElement {
    const fraction = st.risk_budget.fraction_spent;
    const width = Math.max(0, Math.min(100, fraction * 100));
    return el(
      "section",
      { class: "panel", id: "risk" },
      el("h3", {}, "Risk budget"),
      el(
        "div",
        { class: "gauge", role: "meter", "aria-valuenow": String(fraction) },
        el("div", { class: "gauge-fill", style: `width: ${width}%` }),
      ),
      el(
        "p",
        { id: "risk-text" },
        `cumulative risk ${raw(st.cum_risk)} of limit ${raw(st.risk_budget.alpha)}`,
      ),
      el("p", { id: "stop-text" }, `cumulative stopping probability ${raw(st.cum_stop)}`),
    );
  }

  private decisionPanel(st: AuditStatus): HTMLElement {
    let text: string;
    let cls: string;
    switch (st.status) {
      case "stopped-correct":
        text = `stop: outcome confirmed at risk limit α=${raw(st.config.alpha)}`;
        cls = "stop";
        break;
      case "schedule-exhausted":
        text = "consider escalation: schedule exhausted without confirmation";
        cls = "escalate";
        break;
      case "escalated-hand-count":
        text = "escalated: full hand count in progress";
        cls = "escalate";
        break;
      case "planned":
        text = "planned: enter the first round when drawn";
        cls = "continue";
        break;
      default:
        text = "continue: draw the next scheduled round";
        cls = "continue";
    }
    const escalate = async () => {
      if (!this.auditId) return;
      await this.api.escalate(this.auditId);
      await this.refresh();
    };
    return el(
      "section",
      { class: "panel", id: "decision" },
      el("p", { class: `decision ${cls}`, id: "decision-text" }, text),
      st.status === "stopped-correct" || st.status === "escalated-hand-count"
        ? null
        : el("button", { id: "escalate", onclick: escalate }, "Escalate to full hand count"),
    );
  }

  // ---------------------------------------------------------- round entry

  private entryPanel(st: AuditStatus): HTMLElement {
    const terminal = st.status === "stopped-correct" || st.status === "escalated-hand-count";
    if (terminal) return el("section", { class: "panel", id: "entry" });

    const draws = el("input", { id: "entry-draws", type: "number", value: "" });
    const winner = el("input", { id: "entry-winner", type: "number", value: "" });
    const loser = el("input", { id: "entry-loser", type: "number", value: "" });
    const irrelevant = el("input", { id: "entry-irrelevant", type: "number", value: "0" });
    const message = el("p", { class: "error", id: "entry-error" });
    const amendBox = el("input", { id: "entry-amend", type: "checkbox" });

    const submit = async () => {
      message.textContent = "";
      message.className = "error";
      const d = Number(draws.value);
      const w = Number(winner.value);
      const l = Number(loser.value);
      const irr = Number(irrelevant.value);
      // Mirror of the service-side observation invariant; bad totals never
      // leave the browser.
      if (![d, w, l, irr].every((x) => Number.isInteger(x) && x >= 0)) {
        message.textContent = "counts must be non-negative integers";
        return;
      }
      if (w + l + irr !== d) {
        message.textContent =
          `winner + loser + irrelevant = ${w + l + irr} must equal ballots drawn = ${d}`;
        return;
      }
      if (!this.auditId || !this.status) return;
      try {
        await this.api.postRound(this.auditId, {
          draws: d,
          winner: w,
          loser: l,
          irrelevant: irr,
          expected_rounds: this.status.rounds_executed,
          amend: amendBox.checked,
        });
        await this.refresh();
      } catch (exc) {
        if (exc instanceof ApiError && exc.status === 409) {
          message.className = "warning";
          message.textContent = `${exc.message}`;
        } else {
          message.textContent = exc instanceof Error ? exc.message : String(exc);
        }
      }
    };

    return el(
      "section",
      { class: "panel", id: "entry" },
      el("h3", {}, "Enter round"),
      labelled("Ballots drawn this round", draws),
      labelled("For announced winner", winner),
      labelled("For announced runner-up", loser),
      labelled("Irrelevant (other/invalid)", irrelevant),
      labelled("Accept off-schedule draw count (amends schedule)", amendBox),
      el("button", { id: "entry-submit", onclick: submit }, "Record round"),
      message,
    );
  }

  // ---------------------------------------------------------- projections

  private whatifPanel(): HTMLElement {
    const target = el("input", {
      id: "whatif-target",
      type: "range",
      min: "0.5",
      max: "0.99",
      step: "0.01",
      value: "0.9",
    });
    const targetOut = el("span", { id: "whatif-target-value" }, "0.9");
    const recommendation = el("p", { id: "whatif-recommendation" });
    const candidate = el("input", { id: "whatif-n", type: "number", value: "" });
    const projection = el("p", { id: "whatif-projection" });
    const chart = el("div", { id: "whatif-chart" });
    const error = el("p", { class: "error", id: "whatif-error" });

    target.addEventListener("input", () => {
      targetOut.textContent = target.value;
    });

    const recommend = async () => {
      if (!this.auditId) return;
      error.textContent = "";
      try {
        const rec = await this.api.nextRound(this.auditId, Number(target.value));
        recommendation.textContent =
          `recommended: ${raw(rec.scaled_draws)} draws ` +
          `(${raw(rec.relevant_round_size)} relevant cumulative, ` +
          `~${raw(rec.expected_distinct)} distinct) for stopping probability ` +
          `${raw(rec.achieved_stop_prob)} [${rec.method}]`;
        recommendation.dataset.scaledDraws = String(rec.scaled_draws);
        recommendation.dataset.relevant = String(rec.relevant_round_size);
        await this.drawChart(chart, rec.relevant_round_size);
      } catch (exc) {
        error.textContent = exc instanceof Error ? exc.message : String(exc);
      }
    };

    const project = async () => {
      if (!this.auditId) return;
      error.textContent = "";
      try {
        const w = await this.api.whatIf(this.auditId, Number(candidate.value));
        projection.textContent =
          `at n=${raw(w.n)}: kmin=${raw(w.kmin)}, stopping probability ` +
          `${raw(w.conditional_stop_prob)} (joint ${raw(w.stop_prob)})`;
      } catch (exc) {
        error.textContent = exc instanceof Error ? exc.message : String(exc);
      }
    };

    return el(
      "section",
      { class: "panel", id: "whatif" },
      el("h3", {}, "What if"),
      labelled("Target stopping probability", target, targetOut),
      el("button", { id: "whatif-recommend", onclick: recommend }, "Recommend round size"),
      recommendation,
      chart,
      labelled("Candidate cumulative size n", candidate),
      el("button", { id: "whatif-project", onclick: project }, "Project"),
      projection,
      error,
    );
  }

  /** Stop probability vs n around the recommendation, as an SVG polyline. */
  private async drawChart(container: HTMLElement, center: number): Promise<void> {
    if (!this.auditId || !this.status) return;
    const floor = this.status.relevant_drawn;
    const lo = Math.max(floor + 1, Math.floor(center * 0.7));
    const hi = Math.max(lo + 1, Math.ceil(center * 1.25));
    const count = 12;
    const ns: number[] = [];
    for (let i = 0; i < count; i++) {
      ns.push(Math.round(lo + ((hi - lo) * i) / (count - 1)));
    }
    const samples = await Promise.all(
      [...new Set(ns)].map(async (n) => ({
        n,
        prob: (await this.api.whatIf(this.auditId!, n)).conditional_stop_prob,
      })),
    );
    const w = 320;
    const h = 80;
    const x = (n: number) => ((n - lo) / (hi - lo)) * (w - 10) + 5;
    const y = (p: number) => h - 5 - p * (h - 10);
    const points = samples.map((s) => `${x(s.n).toFixed(1)},${y(s.prob).toFixed(1)}`).join(" ");
    const markX = x(center).toFixed(1);
    clear(container);
    container.innerHTML =
      `<svg width="${w}" height="${h}" viewBox="0 0 ${w} ${h}" id="whatif-svg">` +
      `<polyline points="${points}" fill="none" stroke="currentColor"/>` +
      `<line x1="${markX}" y1="0" x2="${markX}" y2="${h}" stroke="currentColor" stroke-dasharray="3,2"/>` +
      `</svg>`;
  }
}

function labelled(text: string, ...controls: HTMLElement[]): HTMLElement {
  return el("label", { class: "field" }, el("span", {}, text), ...controls);
}
