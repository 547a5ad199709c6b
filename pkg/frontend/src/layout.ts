import { LayoutData } from "./api.js";
import { svgNode } from "./svg.js";

export interface LayoutCallbacks {
  // point is in layout coordinates, not yet clamped
  onPick: (point: [number, number]) => void;
  onHover?: (member: number | null) => void;
}

const PALETTE = [
  "#4878a8",
  "#d65f5f",
  "#59a14f",
  "#ed9c4a",
  "#8172b3",
  "#937860",
  "#dc7ec0",
  "#797979",
  "#b5bd4c",
  "#64b5cd",
];

const UNIFORM = "#4878a8";

/** Distinct labels in first-seen order. */
export function labelOrder(labels: string[] | undefined): string[] {
  if (!labels) {
    return [];
  }
  const seen: string[] = [];
  for (const label of labels) {
    if (!seen.includes(label)) {
      seen.push(label);
    }
  }
  return seen;
}

export function colorForMember(
  j: number,
  labels: string[] | undefined,
  order: string[],
): string {
  if (!labels) {
    return UNIFORM;
  }
  const idx = order.indexOf(labels[j]);
  return PALETTE[(idx >= 0 ? idx : 0) % PALETTE.length];
}

const W = 460;
const H = 420;
const M = 36;

/**
 * Scatter of the members at coords scaled by the axis lengths, inside the
 * valid rectangle [0, L1] x [0, L2]. Clicking a mark picks that member's
 * exact stored point; clicking anywhere else inverts the scales. The
 * caller clamps before use.
 */
export function renderLayout(
  container: HTMLElement,
  data: LayoutData,
  selected: [number, number] | null,
  cbs: LayoutCallbacks,
): SVGSVGElement {
  const l1 = data.axisLengths[0];
  const l2 = data.axisLengths[1];
  const sx = (x: number) => M + (l1 > 0 ? x / l1 : 0) * (W - 2 * M);
  const sy = (y: number) => H - M - (l2 > 0 ? y / l2 : 0) * (H - 2 * M);
  const invert = (px: number, py: number): [number, number] => [
    ((px - M) / (W - 2 * M)) * l1,
    ((H - M - py) / (H - 2 * M)) * l2,
  ];

  const svg = svgNode("svg", {
    width: W,
    height: H,
    viewBox: `0 0 ${W} ${H}`,
    class: "layout",
  });

  svg.appendChild(
    svgNode("rect", {
      x: sx(0),
      y: sy(l2),
      width: sx(l1) - sx(0),
      height: sy(0) - sy(l2),
      class: "frame",
    }),
  );
  svg.appendChild(
    svgNode("text", { x: W / 2, y: H - 8, class: "axis-label" }, `axis 1 (length ${fmt(l1)})`),
  );
  const yLabel = svgNode(
    "text",
    { x: 12, y: H / 2, class: "axis-label", transform: `rotate(-90 12 ${H / 2})` },
    `axis 2 (length ${fmt(l2)})`,
  );
  svg.appendChild(yLabel);

  const order = labelOrder(data.labels);
  data.points.forEach((pt, j) => {
    const mark = svgNode("circle", {
      cx: sx(pt[0]),
      cy: sy(pt[1]),
      r: 5,
      fill: colorForMember(j, data.labels, order),
      class: "mark",
      "data-member": j,
    });
    const name = data.labels ? `member ${j} (${data.labels[j]})` : `member ${j}`;
    mark.appendChild(svgNode("title", {}, name));
    mark.addEventListener("click", (ev) => {
      ev.stopPropagation();
      cbs.onPick([pt[0], pt[1]]);
    });
    mark.addEventListener("mouseenter", () => cbs.onHover?.(j));
    mark.addEventListener("mouseleave", () => cbs.onHover?.(null));
    svg.appendChild(mark);
  });

  if (selected) {
    const cx = sx(selected[0]);
    const cy = sy(selected[1]);
    const cross = svgNode("g", { class: "selected" });
    cross.appendChild(svgNode("line", { x1: cx - 7, y1: cy, x2: cx + 7, y2: cy }));
    cross.appendChild(svgNode("line", { x1: cx, y1: cy - 7, x2: cx, y2: cy + 7 }));
    svg.appendChild(cross);
  }

  svg.addEventListener("click", (ev) => {
    const rect = svg.getBoundingClientRect();
    const pt = invert(ev.clientX - rect.left, ev.clientY - rect.top);
    cbs.onPick(pt);
  });

  container.replaceChildren(svg);
  return svg;
}

function fmt(x: number): string {
  return Number.isFinite(x) ? x.toPrecision(3) : String(x);
}
