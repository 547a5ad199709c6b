import {
  ApiError,
  BasisMeta,
  LayoutData,
  fetchCorrelation,
  fetchLayout,
  fetchMeta,
} from "./api.js";
import {
  ReconstructQueue,
  ViewState,
  alphaFromLayoutPoint,
  clampToRect,
  initialState,
} from "./state.js";
import { renderLayout } from "./layout.js";
import { renderCorrelation } from "./correlation.js";
import { renderBars } from "./bars.js";
import { clearBanner, showBanner } from "./banner.js";

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.message;
  }
  if (err instanceof TypeError) {
    return "service unreachable";
  }
  return err instanceof Error ? err.message : String(err);
}

function renderSidebar(el: HTMLElement, meta: BasisMeta): void {
  el.replaceChildren();
  const row = (term: string, detail: string) => {
    const dt = document.createElement("dt");
    dt.textContent = term;
    const dd = document.createElement("dd");
    dd.textContent = detail;
    el.append(dt, dd);
  };
  row("members", String(meta.nMembers));
  row("barycenter branches", String(meta.nBranches));
  row("axes fitted", String(meta.dMax));
  meta.axisLengths.forEach((len, i) => {
    const note = i < 2 ? "" : " (read-only)";
    row(`axis ${i + 1} length${note}`, len.toPrecision(5));
  });
}

async function boot(): Promise<void> {
  const banner = document.getElementById("banner") as HTMLElement;
  const layoutEl = document.getElementById("layout") as HTMLElement;
  const corrEl = document.getElementById("correlation") as HTMLElement;
  const barsEl = document.getElementById("bars") as HTMLElement;
  const metaEl = document.getElementById("meta") as HTMLElement;
  const noteEl = document.getElementById("recon-note") as HTMLElement;
  const statusEl = document.getElementById("status") as HTMLElement;

  let meta: BasisMeta;
  try {
    meta = await fetchMeta();
  } catch (err) {
    showBanner(banner, `could not load the basis: ${describe(err)}`);
    return;
  }
  renderSidebar(metaEl, meta);

  try {
    renderCorrelation(corrEl, await fetchCorrelation());
  } catch (err) {
    showBanner(banner, `correlation view unavailable: ${describe(err)}`);
  }

  let layout: LayoutData;
  try {
    layout = await fetchLayout();
  } catch (err) {
    showBanner(banner, `layout unavailable: ${describe(err)}`);
    return;
  }

  const state: ViewState = initialState();
  const queue = new ReconstructQueue();

  const redraw = () =>
    renderLayout(layoutEl, layout, state.selectedPoint, {
      onPick: pick,
      onHover: (j) => {
        state.hoveredMember = j;
        statusEl.textContent =
          j === null ? "" : `member ${j}: ${meta.memberIds[j] ?? ""}`;
      },
    });

  async function pick(raw: [number, number]): Promise<void> {
    const point = clampToRect(raw, layout.axisLengths);
    const alpha = alphaFromLayoutPoint(point, layout.axisLengths);
    let result;
    try {
      result = await queue.submit([alpha[0], alpha[1]]);
    } catch (err) {
      if (err instanceof ApiError) {
        noteEl.textContent = describe(err);
        noteEl.classList.add("error");
      } else {
        showBanner(banner, `reconstruct failed: ${describe(err)}`);
      }
      return;
    }
    if (result === null) {
      return;
    }
    clearBanner(banner);
    state.selectedPoint = point;
    state.lastReconstruction = result.bdt;
    noteEl.classList.remove("error");
    noteEl.textContent =
      `alpha (${alpha[0].toFixed(3)}, ${alpha[1].toFixed(3)})  ` +
      `${result.bdt.branches.length} branches`;
    renderBars(barsEl, result.bdt);
    redraw();
  }

  redraw();
}

boot();
