/** Typed client for the layout service HTTP/JSON API. */

export interface GraphInfo {
  n: number;
  edges: [number, number][];
  labels: string[] | null;
  sen_classes: number[][];
  sen_class_of: number[];
}

export interface DecodeResponse {
  z: [number, number];
  positions: [number, number][];
  raw_positions: [number, number][];
}

export interface GridCell {
  z: [number, number];
  positions: [number, number][];
}

export interface GridResponse {
  resolution: number;
  cells: GridCell[];
}

export interface MetricsResponse {
  z: [number, number];
  crossings: number;
  crosslessness: number;
  shape: number;
}

export type HeatmapResponse =
  | { status: "done"; metric: string; resolution: number; grid: number[][] }
  | { status: "pending"; metric: string; resolution: number; progress: number };

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  getGraph(): Promise<GraphInfo> {
    return this.request<GraphInfo>("/graph");
  }

  decode(z: [number, number]): Promise<DecodeResponse> {
    return this.request<DecodeResponse>("/decode", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ z }),
    });
  }

  encode(positions: [number, number][]): Promise<{ z: [number, number] }> {
    return this.request("/encode", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ positions }),
    });
  }

  getGrid(res: number): Promise<GridResponse> {
    return this.request<GridResponse>(`/grid?res=${res}`);
  }

  getMetrics(z: [number, number]): Promise<MetricsResponse> {
    return this.request<MetricsResponse>(`/metrics?z=${z[0]},${z[1]}`);
  }

  getHeatmap(metric: string, res: number): Promise<HeatmapResponse> {
    return this.request<HeatmapResponse>(`/heatmap?metric=${metric}&res=${res}`);
  }
}
