import { BdtJson } from "./api.js";
import { svgNode } from "./svg.js";

export interface Bar {
  lo: number;
  hi: number;
}

/**
 * Absolute interval per branch. Normalized inputs are composed through
 * their parent frames starting from the stored root interval (or (0, 1)
 * when none is stored); unnormalized inputs are used as stored. Children
 * nest strictly inside their parent, so bar 0 is always the tallest.
 */
export function bdtToBars(bdt: BdtJson): Bar[] {
  const n = bdt.branches.length;
  if (n === 0) {
    return [];
  }
  if (!bdt.normalized) {
    return bdt.branches.map((b) => ({ lo: b.birth, hi: b.death }));
  }
  const root = bdt.rootInterval ?? [0, 1];
  const out: Bar[] = new Array(n);
  out[0] = { lo: root[0], hi: root[1] };
  for (let i = 1; i < n; i++) {
    const b = bdt.branches[i];
    const parent = out[b.parent ?? 0];
    const span = parent.hi - parent.lo;
    out[i] = { lo: parent.lo + b.birth * span, hi: parent.lo + b.death * span };
  }
  return out;
}

/** Vertical persistence bars, one per branch, in branch order. */
export function renderBars(container: HTMLElement, bdt: BdtJson): SVGSVGElement {
  const bars = bdtToBars(bdt);
  const W = 360;
  const H = 240;
  const M = 24;
  const svg = svgNode("svg", {
    width: W,
    height: H,
    viewBox: `0 0 ${W} ${H}`,
    class: "bars",
  });

  if (bars.length > 0) {
    let vlo = Infinity;
    let vhi = -Infinity;
    for (const b of bars) {
      vlo = Math.min(vlo, b.lo);
      vhi = Math.max(vhi, b.hi);
    }
    const span = vhi - vlo > 0 ? vhi - vlo : 1;
    const sy = (v: number) => H - M - ((v - vlo) / span) * (H - 2 * M);

    const slot = (W - 2 * M) / bars.length;
    const width = Math.min(18, slot * 0.6);
    bars.forEach((b, i) => {
      const x = M + slot * (i + 0.5) - width / 2;
      const rect = svgNode("rect", {
        x,
        y: sy(b.hi),
        width,
        height: Math.max(sy(b.lo) - sy(b.hi), 1),
        class: i === 0 ? "bar bar-root" : "bar",
      });
      const pers = b.hi - b.lo;
      rect.appendChild(svgNode("title", {}, `branch ${i}  persistence ${pers.toFixed(4)}`));
      svg.appendChild(rect);
    });
    svg.appendChild(
      svgNode("line", {
        x1: M,
        y1: H - M,
        x2: W - M,
        y2: H - M,
        class: "axis-line",
      }),
    );
  }

  container.replaceChildren(svg);
  return svg;
}
