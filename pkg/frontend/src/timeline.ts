// Session timeline: a question form plus one card per trace event.
//
// The panel never computes anything itself — it renders whatever the server
// streamed, in stream order, so replaying the same recorded trace twice
// always produces the same DOM.

import {
  createSession,
  streamSession,
  type FetchLike,
  type TraceEvent,
} from "./api.js";

const TOKEN_LIMIT_TITLE = "Token Limit Exceeded";

export class TimelinePanel {
  readonly root: HTMLElement;
  private readonly fetchLike: FetchLike;
  private readonly input: HTMLInputElement;
  private readonly askError: HTMLElement;
  private readonly stepCounter: HTMLElement;
  private readonly tokenCounter: HTMLElement;
  private readonly retryBanner: HTMLElement;
  private readonly finalSlot: HTMLElement;
  private readonly eventList: HTMLOListElement;
  private steps = 0;
  private tokens = 0;
  private lastQuestion = "";
  private running = false;

  constructor(fetchLike: FetchLike) {
    this.fetchLike = fetchLike;
    this.root = document.createElement("section");
    this.root.className = "panel session-panel";
    this.root.innerHTML = `
      <form class="ask-form">
        <input class="ask-input" type="text" placeholder="Ask about the materials tables..." autocomplete="off">
        <button type="submit">Ask</button>
      </form>
      <p class="ask-error" hidden>Type a question first.</p>
      <div class="session-meta">
        <span class="counter step-counter">steps: 0</span>
        <span class="counter token-counter">tokens: 0</span>
      </div>
      <div class="retry-banner" hidden>
        <span>Connection lost before the trace finished.</span>
        <button type="button" class="retry-button">Retry</button>
      </div>
      <div class="final-slot"></div>
      <ol class="event-list"></ol>
    `;
    this.input = this.root.querySelector(".ask-input") as HTMLInputElement;
    this.askError = this.root.querySelector(".ask-error") as HTMLElement;
    this.stepCounter = this.root.querySelector(".step-counter") as HTMLElement;
    this.tokenCounter = this.root.querySelector(".token-counter") as HTMLElement;
    this.retryBanner = this.root.querySelector(".retry-banner") as HTMLElement;
    this.finalSlot = this.root.querySelector(".final-slot") as HTMLElement;
    this.eventList = this.root.querySelector(".event-list") as HTMLOListElement;

    const form = this.root.querySelector(".ask-form") as HTMLFormElement;
    form.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submit(this.input.value);
    });
    const retry = this.root.querySelector(".retry-button") as HTMLButtonElement;
    retry.addEventListener("click", () => {
      void this.submit(this.lastQuestion);
    });
  }

  // Validates locally; an empty or whitespace-only question never reaches
  // the network.
  async submit(question: string): Promise<void> {
    if (question.trim() === "") {
      this.askError.hidden = false;
      return;
    }
    if (this.running) return;
    this.askError.hidden = true;
    this.lastQuestion = question;
    this.reset();
    this.running = true;
    try {
      const sessionId = await createSession(this.fetchLike, question);
      await streamSession(this.fetchLike, sessionId, (event) => this.addEvent(event));
    } catch (err) {
      this.showRetryBanner(err instanceof Error ? err.message : String(err));
    } finally {
      this.running = false;
    }
  }

  reset(): void {
    this.steps = 0;
    this.tokens = 0;
    this.eventList.textContent = "";
    this.finalSlot.textContent = "";
    this.retryBanner.hidden = true;
    this.updateCounters();
  }

  addEvent(event: TraceEvent): void {
    this.tokens += event.tokens;
    if (event.kind === "action") this.steps += 1;
    this.updateCounters();
    if (event.kind === "final") {
      this.finalSlot.appendChild(renderFinalCard(event));
      return;
    }
    const item = document.createElement("li");
    item.appendChild(renderStepCard(event));
    this.eventList.appendChild(item);
  }

  private updateCounters(): void {
    this.stepCounter.textContent = `steps: ${this.steps}`;
    this.tokenCounter.textContent = `tokens: ${this.tokens}`;
  }

  private showRetryBanner(detail: string): void {
    this.retryBanner.hidden = false;
    const label = this.retryBanner.querySelector("span") as HTMLElement;
    label.textContent = `Connection lost before the trace finished (${detail}).`;
  }
}

function text(payload: Record<string, unknown>, key: string): string {
  const value = payload[key];
  return typeof value === "string" ? value : JSON.stringify(value ?? "");
}

function renderStepCard(event: TraceEvent): HTMLElement {
  const card = document.createElement("article");
  card.className = `card kind-${event.kind}`;
  switch (event.kind) {
    case "thought": {
      card.appendChild(heading("Thought"));
      card.appendChild(paragraph(text(event.payload, "text")));
      break;
    }
    case "action": {
      card.appendChild(heading("Action"));
      const tool = paragraph(text(event.payload, "tool"));
      tool.className = "tool-name";
      card.appendChild(tool);
      const input = document.createElement("pre");
      input.className = "tool-input";
      input.textContent = text(event.payload, "input");
      card.appendChild(input);
      break;
    }
    case "observation": {
      card.appendChild(heading("Observation"));
      const notes = event.payload.notes;
      if (Array.isArray(notes)) {
        for (const note of notes) {
          const p = paragraph(String(note));
          p.className = "note";
          card.appendChild(p);
        }
      }
      appendObservationBody(card, text(event.payload, "text"));
      break;
    }
    case "error": {
      const label = text(event.payload, "label");
      if (label === "token_limit") {
        card.classList.add("token-limit");
        card.appendChild(heading(TOKEN_LIMIT_TITLE));
      } else {
        card.appendChild(heading(`Error: ${label}`));
      }
      card.appendChild(paragraph(text(event.payload, "detail")));
      break;
    }
    default: {
      card.appendChild(heading(event.kind));
      card.appendChild(paragraph(JSON.stringify(event.payload)));
    }
  }
  return card;
}

function renderFinalCard(event: TraceEvent): HTMLElement {
  const card = document.createElement("article");
  card.className = "card kind-final final-card";
  card.appendChild(heading("Final Answer"));
  card.appendChild(paragraph(text(event.payload, "answer")));
  const thought = text(event.payload, "thought");
  if (thought !== "") {
    const p = paragraph(thought);
    p.className = "final-thought";
    card.appendChild(p);
  }
  return card;
}

function heading(title: string): HTMLElement {
  const h = document.createElement("h4");
  h.textContent = title;
  return h;
}

function paragraph(content: string): HTMLParagraphElement {
  const p = document.createElement("p");
  p.textContent = content;
  return p;
}

// Observation text is markdown-ish: pipe tables become real tables, anything
// else is shown verbatim in a <pre>.
export function appendObservationBody(card: HTMLElement, body: string): void {
  const lines = body.split("\n");
  let plain: string[] = [];
  let tableRows: string[] = [];
  const flushPlain = () => {
    const chunk = plain.join("\n").trim();
    plain = [];
    if (chunk === "") return;
    const pre = document.createElement("pre");
    pre.textContent = chunk;
    card.appendChild(pre);
  };
  const flushTable = () => {
    if (tableRows.length === 0) return;
    card.appendChild(renderPipeTable(tableRows));
    tableRows = [];
  };
  for (const line of lines) {
    if (line.trimStart().startsWith("|")) {
      flushPlain();
      tableRows.push(line);
    } else {
      flushTable();
      plain.push(line);
    }
  }
  flushTable();
  flushPlain();
}

function splitPipeRow(line: string): string[] {
  let row = line.trim();
  if (row.startsWith("|")) row = row.slice(1);
  if (row.endsWith("|")) row = row.slice(0, -1);
  return row.split("|").map((cell) => cell.trim());
}

function isSeparatorRow(cells: string[]): boolean {
  return cells.every((cell) => /^:?-{3,}:?$/.test(cell));
}

function renderPipeTable(rows: string[]): HTMLTableElement {
  const table = document.createElement("table");
  table.className = "obs-table";
  const parsed = rows.map(splitPipeRow);
  const hasHeader = parsed.length >= 2 && isSeparatorRow(parsed[1]);
  let bodyStart = 0;
  if (hasHeader) {
    const thead = document.createElement("thead");
    const tr = document.createElement("tr");
    for (const cell of parsed[0]) {
      const th = document.createElement("th");
      th.textContent = cell;
      tr.appendChild(th);
    }
    thead.appendChild(tr);
    table.appendChild(thead);
    bodyStart = 2;
  }
  const tbody = document.createElement("tbody");
  for (const cells of parsed.slice(bodyStart)) {
    if (isSeparatorRow(cells)) continue;
    const tr = document.createElement("tr");
    for (const cell of cells) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  return table;
}
