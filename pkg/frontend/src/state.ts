// Explorer state: slider values, preset, strategy selection. The state is
// round-trippable through the URL query so scenarios are sharable, and the
// request builders are the single place where state turns into API calls.

import type { AllocateRequest, GlidepathRequest, StrategyKind } from './types';

export const GAMMA_MIN = 0.5;
export const GAMMA_MAX = 12;
export const HORIZON = 40;

export interface ExplorerState {
  gamma: number;
  wealth: number;
  time: number;
  preset: string;
  strategies: StrategyKind[];
}

export const DEFAULT_STATE: ExplorerState = {
  gamma: 8,
  wealth: 0.2,
  time: 0,
  preset: 'paper-baseline',
  strategies: ['pi0', 'pi1', 'pi2', 'pi3'],
};

const ALL_STRATEGIES: StrategyKind[] = ['pi0', 'pi1', 'pi2', 'pi3', 'optimal'];

const clamp = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);

export function sanitize(state: ExplorerState): ExplorerState {
  const strategies = state.strategies.filter((s): s is StrategyKind =>
    ALL_STRATEGIES.includes(s),
  );
  return {
    gamma: clamp(Number.isFinite(state.gamma) ? state.gamma : DEFAULT_STATE.gamma,
      GAMMA_MIN, GAMMA_MAX),
    wealth: Math.max(Number.isFinite(state.wealth) ? state.wealth : DEFAULT_STATE.wealth, 0),
    time: clamp(Number.isFinite(state.time) ? state.time : DEFAULT_STATE.time, 0, HORIZON),
    preset: state.preset || DEFAULT_STATE.preset,
    strategies: strategies.length ? strategies : [...DEFAULT_STATE.strategies],
  };
}

export function toQuery(state: ExplorerState): string {
  const params = new URLSearchParams({
    gamma: String(state.gamma),
    wealth: String(state.wealth),
    time: String(state.time),
    preset: state.preset,
    strategies: state.strategies.join(','),
  });
  return params.toString();
}

export function fromQuery(query: string): ExplorerState {
  const params = new URLSearchParams(query);
  const read = (key: keyof ExplorerState) => params.get(key as string);
  return sanitize({
    gamma: read('gamma') !== null ? Number(read('gamma')) : DEFAULT_STATE.gamma,
    wealth: read('wealth') !== null ? Number(read('wealth')) : DEFAULT_STATE.wealth,
    time: read('time') !== null ? Number(read('time')) : DEFAULT_STATE.time,
    preset: read('preset') ?? DEFAULT_STATE.preset,
    strategies: read('strategies') !== null
      ? (read('strategies') as string).split(',').filter(Boolean) as StrategyKind[]
      : [...DEFAULT_STATE.strategies],
  });
}

export function allocateRequest(state: ExplorerState, strategy: StrategyKind): AllocateRequest {
  return {
    preset: state.preset,
    gamma: state.gamma,
    strategy,
    time: state.time,
    wealth: state.wealth,
  };
}

export function glidepathRequest(state: ExplorerState): GlidepathRequest {
  return { preset: state.preset, gamma: state.gamma, strategy: 'pi3' };
}
