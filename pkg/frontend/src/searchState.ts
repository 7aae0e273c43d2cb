export type ResultOrder = 'date' | 'tension';

export interface SearchState {
  session: string | null;
  actor: string | null;
  order: ResultOrder;
  limit: number;
}

export const DEFAULT_LIMIT = 50;

export function defaultSearchState(): SearchState {
  return { session: null, actor: null, order: 'date', limit: DEFAULT_LIMIT };
}

/** Encode the state as a URL query string; defaults are omitted so the
 * canonical form of the default state is the empty string. */
export function serializeSearchState(state: SearchState): string {
  const params = new URLSearchParams();
  if (state.session !== null && state.session !== '') params.set('session', state.session);
  if (state.actor !== null && state.actor !== '') params.set('actor', state.actor);
  if (state.order !== 'date') params.set('order', state.order);
  if (state.limit !== DEFAULT_LIMIT) params.set('limit', String(state.limit));
  const encoded = params.toString();
  return encoded === '' ? '' : `?${encoded}`;
}

export function parseSearchState(queryString: string): SearchState {
  const params = new URLSearchParams(queryString.replace(/^\?/, ''));
  const state = defaultSearchState();
  const session = params.get('session');
  if (session) state.session = session;
  const actor = params.get('actor');
  if (actor) state.actor = actor;
  if (params.get('order') === 'tension') state.order = 'tension';
  const limit = Number(params.get('limit'));
  if (Number.isInteger(limit) && limit > 0) state.limit = limit;
  return state;
}

/** Query string for GET /paragraphs: every effective parameter is explicit. */
export function toApiQuery(state: SearchState): string {
  const params = new URLSearchParams();
  if (state.session !== null && state.session !== '') params.set('session', state.session);
  if (state.actor !== null && state.actor !== '') params.set('actor', state.actor);
  params.set('order', state.order);
  params.set('limit', String(state.limit));
  return `?${params.toString()}`;
}

export function searchStatesEqual(a: SearchState, b: SearchState): boolean {
  return (
    a.session === b.session &&
    a.actor === b.actor &&
    a.order === b.order &&
    a.limit === b.limit
  );
}
