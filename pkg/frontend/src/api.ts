/**
 * Typed client for the review service HTTP API. Every mutation goes through
 * POST /detections/{id}/review; the UI never fabricates state locally.
 */

export type Status = 'pending' | 'confirmed' | 'rejected';
export type FacilitySubtype = 'oil_refinery' | 'crude_oil_terminal' | 'lng_terminal';

export interface DetectionRow {
  id: string;
  lat: number;
  lon: number;
  max_probability: number;
  mean_probability: number;
  tile_count: number;
  status: Status;
  facility_type: FacilitySubtype | null;
  tank_count: number | null;
  reviewer: string;
  reviewed_at: string | null;
}

export interface DetectionPage {
  items: DetectionRow[];
  total: number;
  page: number;
  page_size: number;
}

export interface ReviewRequest {
  action: 'classify' | 'reject' | 'reopen';
  facility_type?: FacilitySubtype;
  tank_count?: number;
  reviewer?: string;
}

export interface Table1Row {
  total_detections: number;
  coverage_percent: string;
  covered: number;
  cluster_total: number;
  new_detections: number;
}

export interface Table1Report {
  oil_refinery: Table1Row;
  petroleum_terminal: Table1Row;
}

export interface StatusCounts {
  pending: number;
  confirmed: number;
  rejected: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

const toQuery = (params: Record<string, string | number | undefined>): string => {
  const pairs = Object.entries(params).filter(([, v]) => v !== undefined);
  if (pairs.length === 0) return '';
  const q = new URLSearchParams();
  for (const [k, v] of pairs) q.set(k, String(v));
  return `?${q.toString()}`;
};

export class ApiClient {
  constructor(readonly baseUrl: string = '') {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === 'string') detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  listDetections(params: {
    status?: Status;
    type?: string;
    page?: number;
    page_size?: number;
  } = {}): Promise<DetectionPage> {
    return this.request<DetectionPage>(`/detections${toQuery(params)}`);
  }

  getDetection(id: string): Promise<DetectionRow> {
    return this.request<DetectionRow>(`/detections/${id}`);
  }

  imageUrl(id: string): string {
    return `${this.baseUrl}/detections/${id}/image`;
  }

  camUrl(id: string): string {
    return `${this.baseUrl}/detections/${id}/cam`;
  }

  /** Resolves true when a CAM overlay exists, false on the 409 "no feature
   * maps" answer (the toggle is then disabled). */
  async camAvailable(id: string): Promise<boolean> {
    const resp = await fetch(this.camUrl(id));
    if (resp.status === 409) return false;
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return true;
  }

  review(id: string, body: ReviewRequest): Promise<DetectionRow> {
    return this.request<DetectionRow>(`/detections/${id}/review`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  statusCounts(): Promise<StatusCounts> {
    return this.request<StatusCounts>('/reports/status');
  }

  /** Returns null when benchmark datasets are not configured (409). */
  async table1(): Promise<Table1Report | null> {
    try {
      return await this.request<Table1Report>('/reports/table1');
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) return null;
      throw err;
    }
  }

  confirmedGeojson(): Promise<{
    type: string;
    features: Array<{
      geometry: { coordinates: [number, number] };
      properties: {
        id: string;
        facility_type: FacilitySubtype;
        rolled_type: string;
        tank_count: number | null;
      };
    }>;
  }> {
    return this.request('/export/confirmed.geojson');
  }
}
