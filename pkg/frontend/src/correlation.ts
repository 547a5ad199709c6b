import { CorrelationData } from "./api.js";
import { svgNode } from "./svg.js";

export interface Arrow {
  index: number;
  x: number;
  y: number;
}

/** Arrows that should be drawn: flagged rows are hidden. */
export function visibleArrows(data: CorrelationData): Arrow[] {
  const out: Arrow[] = [];
  for (let i = 0; i < data.arrows.length; i++) {
    if (data.flags[i]) {
      continue;
    }
    out.push({ index: i, x: data.arrows[i][0], y: data.arrows[i][1] });
  }
  return out;
}

/**
 * Unit disk with one arrow per barycenter branch. The service already
 * rescales any row whose norm exceeds 1, so every tip lies on or inside
 * the boundary.
 */
export function renderCorrelation(
  container: HTMLElement,
  data: CorrelationData,
): SVGSVGElement {
  const S = 320;
  const C = S / 2;
  const R = S / 2 - 14;
  const svg = svgNode("svg", {
    width: S,
    height: S,
    viewBox: `0 0 ${S} ${S}`,
    class: "correlation",
  });

  const defs = svgNode("defs");
  const marker = svgNode("marker", {
    id: "arrowhead",
    markerWidth: 8,
    markerHeight: 8,
    refX: 6,
    refY: 3,
    orient: "auto",
  });
  marker.appendChild(svgNode("path", { d: "M0,0 L6,3 L0,6 Z", class: "arrow-head" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  svg.appendChild(svgNode("circle", { cx: C, cy: C, r: R, class: "disk" }));
  svg.appendChild(svgNode("line", { x1: C - R, y1: C, x2: C + R, y2: C, class: "disk-axis" }));
  svg.appendChild(svgNode("line", { x1: C, y1: C - R, x2: C, y2: C + R, class: "disk-axis" }));

  for (const arrow of visibleArrows(data)) {
    const line = svgNode("line", {
      x1: C,
      y1: C,
      x2: C + arrow.x * R,
      y2: C - arrow.y * R,
      class: "arrow",
      "marker-end": "url(#arrowhead)",
      "data-branch": arrow.index,
    });
    line.appendChild(
      svgNode("title", {}, `branch ${arrow.index}  rho (${arrow.x.toFixed(3)}, ${arrow.y.toFixed(3)})`),
    );
    svg.appendChild(line);
  }

  container.replaceChildren(svg);
  return svg;
}
