// Entry point: two tabs (session console, GA runs) over same-origin fetch.

import { TimelinePanel } from "./timeline.js";
import { GaPanel } from "./ga.js";

function mount(): void {
  const host = document.getElementById("app");
  if (host === null) return;
  const fetchLike = window.fetch.bind(window);

  const timeline = new TimelinePanel(fetchLike);
  const ga = new GaPanel(fetchLike);

  const tabs = document.createElement("nav");
  tabs.className = "tabs";
  const sessionTab = tabButton("Sessions", true);
  const gaTab = tabButton("GA runs", false);
  tabs.appendChild(sessionTab);
  tabs.appendChild(gaTab);

  const show = (which: "session" | "ga") => {
    timeline.root.hidden = which !== "session";
    ga.root.hidden = which !== "ga";
    sessionTab.classList.toggle("active", which === "session");
    gaTab.classList.toggle("active", which === "ga");
  };
  sessionTab.addEventListener("click", () => show("session"));
  gaTab.addEventListener("click", () => show("ga"));

  host.appendChild(tabs);
  host.appendChild(timeline.root);
  host.appendChild(ga.root);
  show("session");
}

function tabButton(label: string, active: boolean): HTMLButtonElement {
  const button = document.createElement("button");
  button.type = "button";
  button.className = active ? "tab active" : "tab";
  button.textContent = label;
  return button;
}

mount();
