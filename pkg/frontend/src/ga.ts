// GA run panel: submit a plan, then render the summary the server returns.
//
// The chart only bins and draws; means, fitness, and the best gene are taken
// verbatim from the summary payload.

import {
  fetchGaSummary,
  startGaRun,
  ApiError,
  type FetchLike,
  type GaSummary,
} from "./api.js";
import {
  renderHistogram,
  SERIES_COLORS,
  type HistogramSeries,
} from "./histogram.js";

export class GaPanel {
  readonly root: HTMLElement;
  private readonly fetchLike: FetchLike;
  private readonly status: HTMLElement;
  private readonly emptyState: HTMLElement;
  private readonly result: HTMLElement;

  constructor(fetchLike: FetchLike) {
    this.fetchLike = fetchLike;
    this.root = document.createElement("section");
    this.root.className = "panel ga-panel";
    this.root.innerHTML = `
      <form class="ga-form">
        <label>property <input name="property" value="hydrogen_uptake"></label>
        <label>objective <input name="objective" value="near 38"></label>
        <label>cycles <input name="cycles" type="number" value="3" min="1"></label>
        <label>parents <input name="parents" type="number" value="20" min="2"></label>
        <label>children <input name="children" type="number" value="20" min="1"></label>
        <label>topologies <input name="topologies" placeholder="all registered"></label>
        <label>seed <input name="seed" type="number" value="0"></label>
        <button type="submit">Run</button>
      </form>
      <p class="ga-status" hidden></p>
      <p class="ga-empty" hidden>No such run on this server.</p>
      <div class="ga-result" hidden>
        <div class="best-card">
          <h4>best gene</h4>
          <p class="best-gene"></p>
          <p class="best-values"></p>
        </div>
        <div class="chart-slot"></div>
        <ul class="legend"></ul>
      </div>
    `;
    this.status = this.root.querySelector(".ga-status") as HTMLElement;
    this.emptyState = this.root.querySelector(".ga-empty") as HTMLElement;
    this.result = this.root.querySelector(".ga-result") as HTMLElement;
    const form = this.root.querySelector(".ga-form") as HTMLFormElement;
    form.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submit(form);
    });
  }

  private async submit(form: HTMLFormElement): Promise<void> {
    const data = new FormData(form);
    const str = (name: string) => String(data.get(name) ?? "").trim();
    const num = (name: string) => Number.parseInt(str(name), 10);
    const property = str("property");
    const objective = str("objective");
    if (property === "" || objective === "") {
      this.showStatus("property and objective are required");
      return;
    }
    const config: Record<string, unknown> = {
      cycles: num("cycles"),
      parents: num("parents"),
      children: num("children"),
      seed: num("seed"),
    };
    const topologies = str("topologies");
    if (topologies !== "") {
      config.topologies = topologies.split(",").map((t) => t.trim()).filter((t) => t !== "");
    }
    this.showStatus("running...");
    try {
      const runId = await startGaRun(this.fetchLike, {
        plan: { properties: [property], objectives: [objective] },
        config,
      });
      await this.loadRun(runId);
    } catch (err) {
      this.showStatus(err instanceof Error ? err.message : String(err));
    }
  }

  // Exposed separately so a run id can be loaded without going through the
  // form (and so tests can exercise the 404 path directly).
  async loadRun(runId: string): Promise<void> {
    this.emptyState.hidden = true;
    this.result.hidden = true;
    try {
      const summary = await fetchGaSummary(this.fetchLike, runId);
      this.status.hidden = true;
      this.renderSummary(summary);
    } catch (err) {
      this.status.hidden = true;
      if (err instanceof ApiError && err.status === 404) {
        this.emptyState.hidden = false;
        return;
      }
      this.showStatus(err instanceof Error ? err.message : String(err));
    }
  }

  renderSummary(summary: GaSummary): void {
    this.result.hidden = false;

    const gene = this.result.querySelector(".best-gene") as HTMLElement;
    gene.textContent = summary.best.gene;
    const values = this.result.querySelector(".best-values") as HTMLElement;
    values.textContent = summary.properties
      .map((prop, i) => `${prop} = ${formatNumber(summary.best.values[i])}`)
      .concat([`fitness ${formatNumber(summary.best.fitness)}`])
      .join(", ");

    // The summary reports per-property columns; the chart shows the first
    // property, which is also the one the first objective scores.
    const series: HistogramSeries[] = summary.generations.map((gen) => ({
      label: gen.index === 0 ? "generation 0 (seed)" : `generation ${gen.index}`,
      values: gen.values[0] ?? [],
      mean: gen.mean[0] ?? null,
    }));
    const objective = summary.objectives[0];
    const target = objective !== undefined && objective.kind === "near" ? objective.target ?? null : null;

    const slot = this.result.querySelector(".chart-slot") as HTMLElement;
    slot.textContent = "";
    slot.appendChild(renderHistogram(series, { target }));

    const legend = this.result.querySelector(".legend") as HTMLElement;
    legend.textContent = "";
    series.forEach((s, i) => {
      const item = document.createElement("li");
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = SERIES_COLORS[i % SERIES_COLORS.length];
      item.appendChild(swatch);
      item.appendChild(document.createTextNode(` ${s.label} (${s.values.length})`));
      legend.appendChild(item);
    });
  }

  private showStatus(message: string): void {
    this.status.hidden = false;
    this.status.textContent = message;
  }
}

function formatNumber(v: number | undefined): string {
  if (v === undefined) return "?";
  if (v === 0) return "0";
  if (Math.abs(v) < 0.001) return v.toExponential(3);
  return String(Math.round(v * 10000) / 10000);
}
