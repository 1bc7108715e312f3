/**
 * Vanilla DOM rendering.  The whole screen is re-rendered from the
 * controller's published state; every displayed number is server
 * reported.  Candidate panes appear in blinded order and only the final
 * screen names models.
 */

import type { ApiClient, DatasetInfo, OutcomeSymbol } from "./api.js";
import type { SessionController, ViewState } from "./session.js";

type Child = Node | string | null;

function el(
  tag: string,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElement {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    if (name === "class") node.className = value;
    else node.setAttribute(name, value);
  }
  for (const child of children) {
    if (child === null) continue;
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

function button(
  label: string,
  onClick: () => void,
  attrs: Record<string, string> = {},
): HTMLButtonElement {
  const node = el("button", { type: "button", ...attrs }, label) as HTMLButtonElement;
  node.addEventListener("click", onClick);
  return node;
}

const OUTCOME_CHOICES: Array<{ value: OutcomeSymbol; label: string }> = [
  { value: "win", label: "Wins" },
  { value: "draw", label: "Draws" },
  { value: "loss", label: "Loses" },
];

function percent(p: number): string {
  return `${(100 * p).toFixed(1)}%`;
}

export class AppView {
  private datasets: DatasetInfo[] = [];
  private datasetError: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly controller: SessionController,
  ) {}

  async mount(): Promise<void> {
    try {
      this.datasets = await this.api.listDatasets();
    } catch (err) {
      this.datasetError = err instanceof Error ? err.message : String(err);
    }
    this.controller.subscribe((state) => this.render(state));
  }

  private render(state: ViewState): void {
    this.root.replaceChildren();
    switch (state.phase) {
      case "setup":
        this.root.append(this.setupScreen(state));
        break;
      case "judging":
        this.root.append(this.judgingScreen(state));
        break;
      case "finished":
        this.root.append(this.finalScreen(state));
        break;
      case "failed":
        this.root.append(
          el("section", { class: "panel error" },
            el("h2", {}, "Session error"),
            el("p", {}, state.error ?? "unknown failure")),
        );
        break;
    }
  }

  private setupScreen(state: ViewState): HTMLElement {
    const datasetSelect = el("select", { id: "dataset" }) as HTMLSelectElement;
    for (const info of this.datasets) {
      datasetSelect.append(
        el("option", { value: info.id },
          `${info.id} (${info.n} queries, ${info.m} models, baseline ${info.baseline})`),
      );
    }
    const budget = el("input", { id: "budget", type: "number", min: "1", value: "10" }) as HTMLInputElement;
    const epsLoss = el("input", { id: "eps-loss", type: "number", step: "0.01", value: "0.2" }) as HTMLInputElement;
    const epsDraw = el("input", { id: "eps-draw", type: "number", step: "0.01", value: "0.3" }) as HTMLInputElement;
    const seed = el("input", { id: "seed", type: "number", value: "0" }) as HTMLInputElement;
    const strategy = el("select", { id: "strategy" }) as HTMLSelectElement;
    for (const name of [
      "llm-selector", "random", "bradley-terry", "most-draws", "uncertainty", "confidence",
    ]) {
      strategy.append(el("option", { value: name }, name));
    }

    const field = (label: string, input: HTMLElement) =>
      el("label", { class: "field" }, el("span", {}, label), input);

    const start = button("Start session", () => {
      void this.controller.start({
        dataset_id: datasetSelect.value,
        budget: Number(budget.value),
        eps_loss: Number(epsLoss.value),
        eps_draw: Number(epsDraw.value),
        strategy: strategy.value,
        seed: Number(seed.value),
      });
    }, { class: "primary" });
    if (state.busy || this.datasets.length === 0) start.disabled = true;

    return el("section", { class: "panel setup" },
      el("h2", {}, "New annotation session"),
      this.datasetError
        ? el("p", { class: "error" }, `datasets unavailable: ${this.datasetError}`)
        : null,
      field("Dataset", datasetSelect),
      field("Budget (judgments)", budget),
      field("ε loss", epsLoss),
      field("ε draw", epsDraw),
      field("Strategy", strategy),
      field("Seed", seed),
      start,
      state.setupError ? el("p", { class: "error", id: "setup-error" }, state.setupError) : null,
    );
  }

  private statusBar(state: ViewState): HTMLElement {
    const summary = state.summary!;
    const spent = summary.t;
    const width = summary.budget > 0 ? (100 * spent) / summary.budget : 0;
    return el("header", { class: "status" },
      el("div", { class: "gauge" },
        el("span", {}, `Budget ${spent} / ${summary.budget}`),
        el("div", { class: "bar" },
          el("div", { class: "fill", style: `width: ${width}%` })),
      ),
      el("div", { class: "facts" },
        el("span", {}, `Entropy ${summary.entropy.toFixed(3)}`),
        el("span", {}, summary.leader === null ? "No leader yet" : `Leader: ${summary.leader}`),
        el("span", { class: "muted" }, `rev ${summary.revision}`),
      ),
    );
  }

  private posteriorPanel(state: ViewState): HTMLElement {
    const summary = state.summary!;
    const rows = Object.entries(summary.posterior).map(([modelId, p]) =>
      el("div", { class: "posterior-row" + (modelId === summary.leader ? " leader" : "") },
        el("span", { class: "model" }, modelId),
        el("div", { class: "bar" },
          el("div", { class: "fill", style: `width: ${100 * p}%` })),
        el("span", { class: "value" }, percent(p)),
      ),
    );
    return el("aside", { class: "panel posterior" },
      el("h3", {}, "P(best | annotations)"),
      ...rows,
    );
  }

  private judgingScreen(state: ViewState): HTMLElement {
    const main = el("section", { class: "judging" }, this.statusBar(state));
    if (state.notice) main.append(el("p", { class: "notice" }, state.notice));

    if (!state.proposal) {
      // Exhausted budget (or a transient gap): no proposal to show.
      const exhausted = state.summary?.status === "exhausted";
      main.append(
        el("div", { class: "panel" },
          el("p", {}, exhausted
            ? "Budget exhausted; finalize to reveal the selection."
            : "No proposal loaded."),
          exhausted
            ? button("Finalize", () => void this.controller.finalize(), { class: "primary" })
            : button("Reload", () => void this.controller.reload()),
        ),
      );
      main.append(this.posteriorPanel(state));
      return main;
    }

    const proposal = state.proposal;
    const blinding = state.blinding!;
    main.append(
      el("div", { class: "panel query" },
        el("h3", {}, `Query ${proposal.query_id}`),
        el("p", { class: "query-text" }, proposal.query_text)),
    );
    main.append(
      el("div", { class: "panel baseline" },
        el("h3", {}, "Baseline response"),
        el("p", { class: "response" }, proposal.baseline_response)),
    );

    const cards = el("div", { class: "cards" });
    for (const modelId of blinding.order) {
      const label = blinding.labelFor[modelId];
      const picks = el("div", { class: "choices", role: "group" });
      for (const choice of OUTCOME_CHOICES) {
        const picked = state.draft[modelId] === choice.value;
        const pick = button(choice.label, () => this.controller.setOutcome(modelId, choice.value), {
          class: "choice" + (picked ? " picked" : ""),
          "data-model": modelId,
          "data-outcome": choice.value,
        });
        picks.append(pick);
      }
      cards.append(
        el("article", { class: "panel card", "data-label": label },
          el("h3", {}, `Response ${label}`),
          el("p", { class: "response" }, proposal.candidate_responses[modelId]),
          el("p", { class: "muted" }, "vs. baseline, this response:"),
          picks,
        ),
      );
    }
    main.append(cards);

    const submit = button("Submit judgments", () => void this.controller.submit(), {
      class: "primary submit",
      id: "submit",
    });
    submit.disabled = state.busy || !this.controller.draftComplete();
    main.append(el("div", { class: "actions" }, submit));
    main.append(this.posteriorPanel(state));
    return main;
  }

  private finalScreen(state: ViewState): HTMLElement {
    const report = state.report!;
    const table = el("table", { class: "rates" },
      el("thead", {},
        el("tr", {},
          el("th", {}, "Model"),
          el("th", {}, "Annotated win rate"),
          el("th", {}, "P(best)"))),
      el("tbody", {},
        ...Object.entries(report.win_rates).map(([modelId, rate]) =>
          el("tr", { class: modelId === report.selected_model ? "selected" : "" },
            el("td", {}, modelId),
            el("td", {}, rate.toFixed(4)),
            el("td", {}, percent(report.posterior[modelId] ?? 0)))),
      ),
    );
    return el("section", { class: "panel final" },
      el("h2", {}, `Selected model: ${report.selected_model}`),
      el("p", {}, `${report.t} judgments spent; identities unmasked below.`),
      table,
    );
  }
}
