// DOM shell: wires sliders and checkboxes to the service and paints the
// view model. Requests are debounced per control; responses are applied
// last-write-wins keyed by request id.

import { ApiClient, ApiError } from './api';
import { chartModel, renderChartSvg } from './chart';
import {
  INITIAL_MODEL,
  ViewModel,
  applyCards,
  applyError,
  applyGlidepath,
  beginRequest,
  cardFor,
} from './controller';
import { num, percent1, weightsLabel } from './format';
import {
  DEFAULT_STATE,
  ExplorerState,
  GAMMA_MAX,
  GAMMA_MIN,
  HORIZON,
  allocateRequest,
  fromQuery,
  glidepathRequest,
  sanitize,
  toQuery,
} from './state';
import type { StrategyKind } from './types';

const DEBOUNCE_MS = 200;

const api = new ApiClient('');
let state: ExplorerState = fromQuery(window.location.search.slice(1));
let model: ViewModel = INITIAL_MODEL;
let timer: number | undefined;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function paint(): void {
  $('banner').hidden = model.banner === null;
  $('banner').textContent = model.banner ?? '';
  $('stale-badge').hidden = !model.stale;

  $('gamma-value').textContent = num(state.gamma, 1);
  $('wealth-value').textContent = num(state.wealth, 2);
  $('time-value').textContent = num(state.time, 1);
  const alphaGamma = $('effective-badge');
  if (model.glidepath) {
    $('chart').innerHTML = renderChartSvg(chartModel(model.glidepath));
  }
  const cards = $('cards');
  cards.innerHTML = '';
  for (const card of model.cards) {
    const div = document.createElement('div');
    div.className = card.response ? 'card' : 'card unavailable';
    const title = document.createElement('h3');
    title.textContent = card.strategy;
    div.appendChild(title);
    const body = document.createElement('p');
    if (card.response) {
      body.textContent = weightsLabel(card.response.weights);
      const badge = document.createElement('span');
      badge.className = 'badge';
      badge.textContent = `effective RRA ${num(card.response.effective_risk_aversion, 3)}`;
      div.appendChild(badge);
      if (card.response.binding.length) {
        const binding = document.createElement('span');
        binding.className = 'binding';
        binding.textContent = card.response.binding.join(', ');
        div.appendChild(binding);
      }
      if (card.strategy === 'pi3' && card.response.alpha !== null) {
        alphaGamma.textContent =
          `alpha ${percent1(card.response.alpha)} -> alpha*gamma ` +
          num(card.response.effective_risk_aversion, 3);
      }
    } else {
      body.textContent = card.unavailable ?? 'unavailable';
    }
    div.appendChild(body);
    cards.appendChild(div);
  }
}

async function refresh(): Promise<void> {
  model = beginRequest(model);
  const requestId = model.requestId;
  window.history.replaceState(null, '', `?${toQuery(state)}`);
  try {
    const glide = await api.glidepath(glidepathRequest(state));
    model = applyGlidepath(model, requestId, glide);
    const cards = await Promise.all(
      state.strategies.map(async (strategy) => {
        try {
          return cardFor(strategy, await api.allocate(allocateRequest(state, strategy)));
        } catch (err) {
          if (err instanceof ApiError) return cardFor(strategy, err);
          throw err;
        }
      }),
    );
    model = applyCards(model, requestId, cards);
  } catch (err) {
    model = applyError(model, requestId, err);
  }
  paint();
}

function schedule(): void {
  window.clearTimeout(timer);
  timer = window.setTimeout(() => void refresh(), DEBOUNCE_MS);
}

function bind(): void {
  const gamma = $<HTMLInputElement>('gamma');
  gamma.min = String(GAMMA_MIN);
  gamma.max = String(GAMMA_MAX);
  gamma.step = '0.1';
  gamma.value = String(state.gamma);
  gamma.addEventListener('input', () => {
    state = sanitize({ ...state, gamma: Number(gamma.value) });
    schedule();
  });

  const wealth = $<HTMLInputElement>('wealth');
  wealth.value = String(state.wealth);
  wealth.addEventListener('input', () => {
    state = sanitize({ ...state, wealth: Number(wealth.value) });
    schedule();
  });

  const time = $<HTMLInputElement>('time');
  time.max = String(HORIZON);
  time.value = String(state.time);
  time.addEventListener('input', () => {
    state = sanitize({ ...state, time: Number(time.value) });
    schedule();
  });

  for (const kind of ['pi0', 'pi1', 'pi2', 'pi3', 'optimal'] as StrategyKind[]) {
    const box = $<HTMLInputElement>(`strategy-${kind}`);
    box.checked = state.strategies.includes(kind);
    box.addEventListener('change', () => {
      const next = box.checked
        ? [...state.strategies, kind]
        : state.strategies.filter((s) => s !== kind);
      state = sanitize({ ...state, strategies: next });
      schedule();
    });
  }

  $('reset').addEventListener('click', () => {
    state = { ...DEFAULT_STATE, strategies: [...DEFAULT_STATE.strategies] };
    window.location.search = toQuery(state);
  });
}

bind();
void refresh();
