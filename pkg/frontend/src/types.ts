import { z } from 'zod';

export const paragraphSchema = z.object({
  id: z.string(),
  session: z.string(),
  ordinal: z.number(),
  text: z.string(),
  speaker: z.string().nullable(),
  tension_score: z.number().nullable(),
  topic_keywords: z.array(z.string()).nullable(),
});
export type ParagraphView = z.infer<typeof paragraphSchema>;

export const relatedSchema = paragraphSchema.extend({
  similarity: z.number(),
});
export type RelatedParagraph = z.infer<typeof relatedSchema>;

export const batchSchema = z.object({
  round: z.number(),
  batch_size: z.number(),
  pending: z.array(paragraphSchema),
});
export type AnnotationBatch = z.infer<typeof batchSchema>;

export const annotationResultSchema = z.object({
  accepted: z.number(),
  round_complete: z.boolean(),
  remaining: z.number(),
  retraining: z.boolean(),
});
export type AnnotationResult = z.infer<typeof annotationResultSchema>;

// Deliberately loose: the panel must render whatever the service reports,
// so unknown keys are preserved rather than stripped.
export const metricsSchema = z
  .object({
    model_id: z.string(),
    precision: z.number(),
    recall: z.number(),
    accuracy: z.number(),
    tp: z.number(),
    fp: z.number(),
    fn: z.number(),
    tn: z.number(),
    al_rounds: z.array(z.object({ round: z.number(), labelled: z.number() })),
  })
  .passthrough();
export type ModelMetrics = z.infer<typeof metricsSchema>;

export const apiErrorSchema = z.object({
  code: z.string(),
  detail: z.string(),
});

export interface LabelRow {
  paragraph_id: string;
  annotator_id: string;
  value: 0 | 1;
}
