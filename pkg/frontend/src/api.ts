// Typed client for the mtpga HTTP service. Shapes mirror the JSON the
// service emits; keep them in sync with the Python side.

export interface BasisMeta {
  formatVersion: number;
  dMax: number;
  nBranches: number;
  nMembers: number;
  axisLengths: number[];
  memberIds: string[];
  params: Record<string, unknown>;
}

export interface BranchJson {
  birth: number;
  death: number;
  parent: number | null;
}

export interface BdtJson {
  branches: BranchJson[];
  normalized: boolean;
  rootInterval: [number, number] | null;
}

export interface MergeTreeNodeJson {
  vertex: number;
  value: number;
  role: string;
  parent: number | null;
}

export interface MergeTreeJson {
  kind: string;
  nodes: MergeTreeNodeJson[];
}

export interface LayoutData {
  points: [number, number][];
  axisLengths: number[];
  labels?: string[];
}

export interface CorrelationData {
  arrows: [number, number][];
  flags: boolean[];
}

export interface MemberView {
  id: string;
  coords: number[];
  error: number;
  input: BdtJson;
  reconstruction: BdtJson;
}

export interface ReconstructResult {
  bdt: BdtJson;
  mergeTree: MergeTreeJson;
}

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") {
      return body.error;
    }
  } catch {
    // body was not json, fall through to the generic message
  }
  return `request failed with status ${resp.status}`;
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) {
    throw new ApiError(resp.status, await errorMessage(resp));
  }
  return (await resp.json()) as T;
}

export function fetchMeta(): Promise<BasisMeta> {
  return getJson<BasisMeta>("/api/basis/meta");
}

export function fetchLayout(): Promise<LayoutData> {
  return getJson<LayoutData>("/api/layout");
}

export function fetchCorrelation(): Promise<CorrelationData> {
  return getJson<CorrelationData>("/api/correlation");
}

export function fetchMember(j: number): Promise<MemberView> {
  return getJson<MemberView>(`/api/member/${j}`);
}

export async function postReconstruct(
  alpha: number[],
  signal?: AbortSignal,
): Promise<ReconstructResult> {
  const resp = await fetch("/api/reconstruct", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ alpha }),
    signal,
  });
  if (!resp.ok) {
    throw new ApiError(resp.status, await errorMessage(resp));
  }
  return (await resp.json()) as ReconstructResult;
}
