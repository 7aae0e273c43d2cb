import {
  AnnotationBatch,
  AnnotationResult,
  LabelRow,
  ModelMetrics,
  ParagraphView,
  RelatedParagraph,
  annotationResultSchema,
  apiErrorSchema,
  batchSchema,
  metricsSchema,
  paragraphSchema,
  relatedSchema,
} from './types';
import { SearchState, toApiQuery } from './searchState';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, 'network_error', String(err));
    }
    const body: unknown = await response.json().catch(() => null);
    if (!response.ok) {
      const parsed = apiErrorSchema.safeParse(body);
      if (parsed.success) {
        throw new ApiError(response.status, parsed.data.code, parsed.data.detail);
      }
      throw new ApiError(response.status, 'http_error', `status ${response.status}`);
    }
    return body;
  }

  async searchParagraphs(state: SearchState): Promise<ParagraphView[]> {
    const body = await this.request(`/paragraphs${toApiQuery(state)}`);
    return paragraphSchema.array().parse(body);
  }

  async relatedParagraphs(paragraphId: string, k = 10): Promise<RelatedParagraph[]> {
    const body = await this.request(
      `/paragraphs/${encodeURIComponent(paragraphId)}/related?k=${k}`,
    );
    return relatedSchema.array().parse(body);
  }

  async currentBatch(): Promise<AnnotationBatch> {
    return batchSchema.parse(await this.request('/active-learning/batch'));
  }

  async submitAnnotations(labels: LabelRow[]): Promise<AnnotationResult> {
    const body = await this.request('/annotations', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ labels }),
    });
    return annotationResultSchema.parse(body);
  }

  async currentMetrics(): Promise<ModelMetrics | null> {
    try {
      return metricsSchema.parse(await this.request('/models/current/metrics'));
    } catch (err) {
      if (err instanceof ApiError && err.code === 'no_model') return null;
      throw err;
    }
  }
}
