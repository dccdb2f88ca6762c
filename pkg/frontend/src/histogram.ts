// Overlaid per-generation histograms for GA run summaries.
//
// Binning is the only arithmetic done client-side; means come straight from
// the server so the chart and any other consumer of the summary agree.

export interface Bin {
  binStart: number;
  binEnd: number;
  binCenter: number;
  count: number;
}

export interface HistogramSeries {
  label: string;
  values: number[];
  mean: number | null;
}

// Fixed shared range so every series lands in comparable bins.
export function buildHistogram(
  values: number[],
  lo: number,
  hi: number,
  nBins: number,
): Bin[] {
  if (nBins <= 0 || hi <= lo) return [];
  const width = (hi - lo) / nBins;
  const bins: Bin[] = [];
  for (let i = 0; i < nBins; i++) {
    const binStart = lo + i * width;
    bins.push({ binStart, binEnd: binStart + width, binCenter: binStart + width / 2, count: 0 });
  }
  for (const v of values) {
    if (Number.isNaN(v)) continue;
    let idx = Math.floor((v - lo) / width);
    if (idx === nBins && v === hi) idx = nBins - 1; // closed top edge
    if (idx >= 0 && idx < nBins) bins[idx].count += 1;
  }
  return bins;
}

export function sharedRange(
  series: HistogramSeries[],
  extra: number[] = [],
): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of series) {
    for (const v of s.values) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  for (const v of extra) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  const pad = (hi - lo) * 0.05;
  return [lo - pad, hi + pad];
}

export const SERIES_COLORS = ["#8888aa", "#5b8bd0", "#3fa564", "#d08a3f", "#c45b5b", "#7a5bc4"];

const WIDTH = 640;
const HEIGHT = 240;
const PAD_LEFT = 42;
const PAD_RIGHT = 12;
const PAD_TOP = 10;
const PAD_BOTTOM = 26;

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

export interface RenderOptions {
  nBins?: number;
  target?: number | null;
}

// One translucent bar series per generation, a dashed mean marker per series
// (server-provided mean), and a solid vertical line at the objective target
// when there is one.  Series with no values still get an (empty) group so
// the legend and the chart stay aligned.
export function renderHistogram(
  series: HistogramSeries[],
  options: RenderOptions = {},
): SVGSVGElement {
  const nBins = options.nBins ?? 18;
  const target = options.target ?? null;
  const [lo, hi] = sharedRange(series, target === null ? [] : [target]);
  const binned = series.map((s) => buildHistogram(s.values, lo, hi, nBins));
  let maxCount = 1;
  for (const bins of binned) {
    for (const b of bins) if (b.count > maxCount) maxCount = b.count;
  }

  const plotW = WIDTH - PAD_LEFT - PAD_RIGHT;
  const plotH = HEIGHT - PAD_TOP - PAD_BOTTOM;
  const x = (v: number) => PAD_LEFT + ((v - lo) / (hi - lo)) * plotW;
  const y = (count: number) => PAD_TOP + plotH - (count / maxCount) * plotH;

  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: "histogram",
    role: "img",
  });

  svg.appendChild(
    svgEl("line", {
      class: "axis",
      x1: String(PAD_LEFT),
      y1: String(PAD_TOP + plotH),
      x2: String(PAD_LEFT + plotW),
      y2: String(PAD_TOP + plotH),
    }),
  );
  for (const tick of [lo, (lo + hi) / 2, hi]) {
    const label = svgEl("text", {
      class: "tick",
      x: String(x(tick)),
      y: String(HEIGHT - 8),
      "text-anchor": "middle",
    });
    label.textContent = formatTick(tick);
    svg.appendChild(label);
  }

  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    const group = svgEl("g", { class: "series", "data-label": s.label });
    for (const bin of binned[i]) {
      if (bin.count === 0) continue;
      group.appendChild(
        svgEl("rect", {
          x: String(x(bin.binStart)),
          y: String(y(bin.count)),
          width: String(Math.max(x(bin.binEnd) - x(bin.binStart) - 1, 1)),
          height: String(PAD_TOP + plotH - y(bin.count)),
          fill: color,
          "fill-opacity": "0.45",
        }),
      );
    }
    if (s.mean !== null) {
      group.appendChild(
        svgEl("line", {
          class: "mean-marker",
          x1: String(x(s.mean)),
          y1: String(PAD_TOP),
          x2: String(x(s.mean)),
          y2: String(PAD_TOP + plotH),
          stroke: color,
          "stroke-dasharray": "5 3",
          "stroke-width": "1.5",
        }),
      );
    }
    svg.appendChild(group);
  });

  if (target !== null) {
    svg.appendChild(
      svgEl("line", {
        class: "target-line",
        x1: String(x(target)),
        y1: String(PAD_TOP),
        x2: String(x(target)),
        y2: String(PAD_TOP + plotH),
        stroke: "#222222",
        "stroke-width": "2",
      }),
    );
  }

  return svg;
}

function formatTick(v: number): string {
  if (Math.abs(v) >= 100) return v.toFixed(0);
  if (Math.abs(v) >= 1) return v.toFixed(1);
  return v.toPrecision(2);
}
