// Pure view-model transitions. The DOM layer (app.ts) only schedules
// requests and paints whatever model these functions produce, so every
// displayed number stays traceable to a service response.

import { ApiError, ServiceDownError } from './api';
import type { AllocationResponse, GlidepathResponse, StrategyKind } from './types';

export interface StrategyCard {
  strategy: StrategyKind;
  response: AllocationResponse | null;
  unavailable: string | null; // 409 guidance or error detail
}

export interface ViewModel {
  banner: string | null;
  stale: boolean;
  glidepath: GlidepathResponse | null;
  cards: StrategyCard[];
  requestId: number;
}

export const INITIAL_MODEL: ViewModel = {
  banner: null,
  stale: false,
  glidepath: null,
  cards: [],
  requestId: 0,
};

export function beginRequest(model: ViewModel): ViewModel {
  return { ...model, stale: true, requestId: model.requestId + 1 };
}

export function applyGlidepath(
  model: ViewModel,
  requestId: number,
  response: GlidepathResponse,
): ViewModel {
  if (requestId !== model.requestId) return model; // last write wins
  return { ...model, banner: null, stale: false, glidepath: response };
}

export function applyCards(
  model: ViewModel,
  requestId: number,
  cards: StrategyCard[],
): ViewModel {
  if (requestId !== model.requestId) return model;
  return { ...model, banner: null, stale: false, cards };
}

export function applyError(model: ViewModel, requestId: number, error: unknown): ViewModel {
  if (requestId !== model.requestId) return model;
  if (error instanceof ServiceDownError) {
    return { ...model, stale: true, banner: 'service unreachable — showing last known data' };
  }
  if (error instanceof ApiError) {
    return { ...model, stale: true, banner: `request failed (${error.status}): ${error.detail}` };
  }
  return { ...model, stale: true, banner: String(error) };
}

export function cardFor(
  strategy: StrategyKind,
  outcome: AllocationResponse | ApiError,
): StrategyCard {
  if (outcome instanceof ApiError) {
    const note = outcome.isMissingSurface
      ? 'optimal surface not cached on the server yet'
      : outcome.detail;
    return { strategy, response: null, unavailable: note };
  }
  return { strategy, response: outcome, unavailable: null };
}
