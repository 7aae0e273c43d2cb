import { ModelMetrics, ParagraphView, RelatedParagraph } from './types';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function scoreBadge(score: number | null): string {
  if (score === null) return '<span class="score unscored">unscored</span>';
  return `<span class="score">${escapeHtml(String(score))}</span>`;
}

export function renderParagraphCard(p: ParagraphView): string {
  const speaker = p.speaker === null ? 'Unattributed' : p.speaker;
  const keywords =
    p.topic_keywords === null
      ? ''
      : `<div class="keywords">${p.topic_keywords.map(escapeHtml).join(' · ')}</div>`;
  return [
    `<article class="card" data-id="${escapeHtml(p.id)}">`,
    `<header><span class="speaker">${escapeHtml(speaker)}</span>`,
    `<span class="session">${escapeHtml(p.session)} ¶${p.ordinal}</span>`,
    `${scoreBadge(p.tension_score)}</header>`,
    `<p>${escapeHtml(p.text)}</p>`,
    keywords,
    `<button class="related-btn" data-id="${escapeHtml(p.id)}">related</button>`,
    `</article>`,
  ].join('');
}

export function renderResults(paragraphs: ParagraphView[]): string {
  if (paragraphs.length === 0) return '<p class="empty">No paragraphs match.</p>';
  return paragraphs.map(renderParagraphCard).join('\n');
}

export function renderRelatedPanel(origin: string, related: RelatedParagraph[]): string {
  const rows = related
    .map(
      (p) =>
        `<li><span class="sim">${escapeHtml(String(p.similarity))}</span> ${renderParagraphCard(p)}</li>`,
    )
    .join('\n');
  return `<h2>Related to ${escapeHtml(origin)}</h2><ol>${rows}</ol>`;
}

/** Every number is rendered verbatim from the payload: the client does no
 * rounding, derivation or arithmetic of its own. */
export function renderMetricsPanel(metrics: ModelMetrics | null): string {
  if (metrics === null) {
    return '<p class="empty">No trained model yet. Run training to see metrics.</p>';
  }
  const tile = (label: string, value: unknown) =>
    `<div class="tile"><span class="label">${escapeHtml(label)}</span>` +
    `<span class="value">${escapeHtml(String(value))}</span></div>`;
  const confusion =
    `<table class="confusion"><tr><td>tp ${metrics.tp}</td><td>fp ${metrics.fp}</td></tr>` +
    `<tr><td>fn ${metrics.fn}</td><td>tn ${metrics.tn}</td></tr></table>`;
  const rounds = metrics.al_rounds
    .map((r) => `<tr><td>${r.round}</td><td>${r.labelled}</td></tr>`)
    .join('');
  return [
    `<p class="model-id">model ${escapeHtml(metrics.model_id)}</p>`,
    '<div class="tiles">',
    tile('precision', metrics.precision),
    tile('recall', metrics.recall),
    tile('accuracy', metrics.accuracy),
    '</div>',
    confusion,
    `<table class="rounds"><tr><th>round</th><th>labelled</th></tr>${rounds}</table>`,
  ].join('\n');
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner" role="alert">${escapeHtml(message)}</div>`;
}
