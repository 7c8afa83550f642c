// Typed client for the glidepath service. All numbers displayed anywhere in
// the UI come from these responses; nothing is recomputed client-side.

import type {
  AllocateRequest,
  AllocationResponse,
  GlidepathRequest,
  GlidepathResponse,
  HealthResponse,
} from './types';

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceDownError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
    this.name = 'ServiceDownError';
  }
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = 'ApiError';
    this.status = status;
    this.detail = detail;
  }

  get isMissingSurface(): boolean {
    return this.status === 409;
  }
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchFn;

  constructor(baseUrl = '', fetchFn: FetchFn = (...args) => fetch(...args)) {
    this.base = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}${path}`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ServiceDownError(err);
    }
    if (!response.ok) {
      const detail = await response
        .json()
        .then((b) => JSON.stringify(b.detail ?? b))
        .catch(() => response.statusText);
      throw new ApiError(response.status, detail);
    }
    return response.json() as Promise<T>;
  }

  async health(): Promise<HealthResponse> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.base}/api/health`);
    } catch (err) {
      throw new ServiceDownError(err);
    }
    if (!response.ok) throw new ApiError(response.status, response.statusText);
    return response.json() as Promise<HealthResponse>;
  }

  allocate(request: AllocateRequest): Promise<AllocationResponse> {
    return this.post('/api/allocate', request);
  }

  glidepath(request: GlidepathRequest): Promise<GlidepathResponse> {
    return this.post('/api/glidepath', request);
  }
}
