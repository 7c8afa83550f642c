// Wire types for the glidepath service (docs/api_reference.md in the repo root).

export type StrategyKind = 'pi0' | 'pi1' | 'pi2' | 'pi3' | 'optimal';

export interface AllocationResponse {
  strategy: StrategyKind;
  gamma: number;
  alpha: number | null;
  weights: number[];
  total: number;
  budget_bound: number;
  effective_risk_aversion: number;
  binding: string[];
}

export interface GlidepathThresholds {
  budget_binding_alpha: number;
  full_stock_alpha: number;
}

export interface GlidepathResponse {
  strategy: StrategyKind;
  gamma: number;
  points: AllocationResponse[];
  thresholds: GlidepathThresholds;
}

export interface AllocateRequest {
  preset?: string;
  gamma: number;
  strategy: StrategyKind;
  alpha?: number;
  time?: number;
  wealth?: number;
  fidelity?: string;
}

export interface GlidepathRequest {
  preset?: string;
  gamma: number;
  strategy: 'pi2' | 'pi3';
  alpha_grid?: number[];
}

export interface HealthResponse {
  status: string;
}
