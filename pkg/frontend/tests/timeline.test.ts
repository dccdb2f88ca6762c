import { describe, expect, it } from "vitest";

import { TimelinePanel, appendObservationBody } from "../src/timeline.js";
import { JUKPAI_SSE, TOKEN_LIMIT_SSE } from "./fixtures.js";
import { chunkedSseResponse, jsonResponse, routeFetch, sseResponse } from "./stubs.js";

const QUESTION = "How high is the accessible surface area of JUKPAI?";

function sessionRoutes(streamText: string) {
  return routeFetch({
    "POST /api/sessions": () => jsonResponse({ session_id: "s-1" }),
    "GET /api/sessions/s-1/events": () => sseResponse(streamText),
  });
}

describe("session timeline", () => {
  it("renders one card per event with the final answer pinned", async () => {
    const { fetchLike } = sessionRoutes(JUKPAI_SSE);
    const panel = new TimelinePanel(fetchLike);
    await panel.submit(QUESTION);

    const cards = panel.root.querySelectorAll(".card");
    expect(cards.length).toBe(4); // thought, action, observation + pinned final
    expect(panel.root.querySelectorAll(".event-list .card").length).toBe(3);

    const finalCard = panel.root.querySelector(".final-slot .final-card");
    expect(finalCard).not.toBeNull();
    expect(finalCard!.textContent).toContain(
      "The Accessible Surface Area for JUKPAI is 1474.22.",
    );
  });

  it("shows stream-reported token and step counts", async () => {
    const { fetchLike } = sessionRoutes(JUKPAI_SSE);
    const panel = new TimelinePanel(fetchLike);
    await panel.submit(QUESTION);

    // 48 + 0 + 19 + 96 from the recorded stream; one action event.
    expect(panel.root.querySelector(".token-counter")!.textContent).toBe("tokens: 163");
    expect(panel.root.querySelector(".step-counter")!.textContent).toBe("steps: 1");
  });

  it("renders observation pipe tables as html tables and keeps tool notes", async () => {
    const { fetchLike } = sessionRoutes(JUKPAI_SSE);
    const panel = new TimelinePanel(fetchLike);
    await panel.submit(QUESTION);

    const observation = panel.root.querySelector(".kind-observation")!;
    const note = observation.querySelector(".note")!;
    expect(note.textContent).toContain("[Table Searcher] Query: SELECT");

    const table = observation.querySelector("table.obs-table")!;
    expect(table).not.toBeNull();
    const headers = Array.from(table.querySelectorAll("th")).map((th) => th.textContent);
    expect(headers).toContain("Accessible Surface Area (m^2/cm^3)");
    const cells = Array.from(table.querySelectorAll("td")).map((td) => td.textContent);
    expect(cells).toContain("1474.22");
    // the separator row is markup, not data
    expect(cells).not.toContain("---");
  });

  it("renders the same recorded stream to the same DOM every time", async () => {
    const render = async () => {
      const { fetchLike } = sessionRoutes(JUKPAI_SSE);
      const panel = new TimelinePanel(fetchLike);
      await panel.submit(QUESTION);
      return panel.root;
    };
    const first = await render();
    const second = await render();
    expect(second.textContent).toBe(first.textContent);
    expect(second.innerHTML).toBe(first.innerHTML);
  });

  it("shows a red terminal card when the session hits the token limit", async () => {
    const { fetchLike } = sessionRoutes(TOKEN_LIMIT_SSE);
    const panel = new TimelinePanel(fetchLike);
    await panel.submit("Show the Density of all materials");

    const card = panel.root.querySelector(".card.kind-error")!;
    expect(card.classList.contains("token-limit")).toBe(true);
    expect(card.querySelector("h4")!.textContent).toBe("Token Limit Exceeded");
    expect(card.textContent).toContain("exceeds budget");

    // terminal: no final answer was pinned
    expect(panel.root.querySelector(".final-slot .final-card")).toBeNull();
    expect(panel.root.querySelector(".token-counter")!.textContent).toBe("tokens: 39");
  });

  it("rejects an empty question locally without any request", async () => {
    const { fetchLike, calls } = sessionRoutes(JUKPAI_SSE);
    const panel = new TimelinePanel(fetchLike);

    await panel.submit("");
    await panel.submit("   ");

    expect(calls.length).toBe(0);
    const error = panel.root.querySelector(".ask-error") as HTMLElement;
    expect(error.hidden).toBe(false);
    expect(error.textContent).toContain("Type a question first.");
  });

  it("offers a retry when the stream drops, and the retry replays cleanly", async () => {
    const frames = JUKPAI_SSE.split("\n\n").filter((f) => f.trim() !== "");
    let attempt = 0;
    const { fetchLike, calls } = routeFetch({
      "POST /api/sessions": () => jsonResponse({ session_id: "s-1" }),
      "GET /api/sessions/s-1/events": () => {
        attempt += 1;
        if (attempt === 1) {
          return chunkedSseResponse([frames[0] + "\n\n", new Error("socket closed")]);
        }
        return sseResponse(JUKPAI_SSE);
      },
    });
    const panel = new TimelinePanel(fetchLike);
    await panel.submit(QUESTION);

    const banner = panel.root.querySelector(".retry-banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("Connection lost");
    expect(panel.root.querySelectorAll(".event-list .card").length).toBe(1);

    await panel.submit(QUESTION); // what the retry button dispatches
    expect(banner.hidden).toBe(true);
    expect(panel.root.querySelectorAll(".card").length).toBe(4);
    expect(calls.filter((c) => c.url.endsWith("/events")).length).toBe(2);
  });
});

describe("observation body rendering", () => {
  it("keeps non-table text verbatim in a pre block", () => {
    const card = document.createElement("div");
    appendObservationBody(card, "no rows matched\ntry another filter");
    expect(card.querySelector("table")).toBeNull();
    expect(card.querySelector("pre")!.textContent).toBe("no rows matched\ntry another filter");
  });

  it("splits mixed text and table content in order", () => {
    const body = "preamble\n| a | b |\n| --- | --- |\n| 1 | 2 |\ntrailer";
    const card = document.createElement("div");
    appendObservationBody(card, body);
    const kinds = Array.from(card.children).map((el) => el.tagName.toLowerCase());
    expect(kinds).toEqual(["pre", "table", "pre"]);
  });
});
