import { describe, expect, it } from 'vitest';
import {
  DEFAULT_LIMIT,
  SearchState,
  defaultSearchState,
  parseSearchState,
  searchStatesEqual,
  serializeSearchState,
  toApiQuery,
} from './searchState';

const CASES: SearchState[] = [
  defaultSearchState(),
  { session: 'WHC-35', actor: null, order: 'date', limit: DEFAULT_LIMIT },
  { session: null, actor: 'Norway', order: 'tension', limit: DEFAULT_LIMIT },
  { session: 'ICHC-12', actor: 'ICOMOS', order: 'tension', limit: 10 },
  { session: null, actor: 'United Kingdom', order: 'date', limit: 200 },
];

describe('serializeSearchState / parseSearchState', () => {
  it('round-trips every state exactly', () => {
    for (const state of CASES) {
      const back = parseSearchState(serializeSearchState(state));
      expect(searchStatesEqual(back, state)).toBe(true);
    }
  });

  it('serializes the default state as the empty string', () => {
    expect(serializeSearchState(defaultSearchState())).toBe('');
  });

  it('omits default values from the query string', () => {
    const encoded = serializeSearchState(CASES[1] as SearchState);
    expect(encoded).toBe('?session=WHC-35');
  });

  it('percent-encodes values with spaces', () => {
    const encoded = serializeSearchState(CASES[4] as SearchState);
    expect(encoded).toContain('actor=United+Kingdom');
    expect(parseSearchState(encoded).actor).toBe('United Kingdom');
  });

  it('ignores malformed limit and order values', () => {
    expect(parseSearchState('?limit=abc&order=banana')).toEqual(defaultSearchState());
    expect(parseSearchState('?limit=-3').limit).toBe(DEFAULT_LIMIT);
  });
});

describe('toApiQuery', () => {
  it('always states order and limit explicitly', () => {
    expect(toApiQuery(defaultSearchState())).toBe('?order=date&limit=50');
  });

  it('carries every active filter', () => {
    const q = toApiQuery({ session: 'WHC-35', actor: 'Norway', order: 'tension', limit: 10 });
    expect(q).toBe('?session=WHC-35&actor=Norway&order=tension&limit=10');
  });
});
