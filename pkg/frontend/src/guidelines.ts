/** Labelling guidelines shown next to the annotation queue, so the working
 * definition of tension is always in view while labelling. */
export const GUIDELINES_HTML = `
<h2>Labelling guidelines</h2>
<p>You are classifying paragraphs of committee summary records as indicating
tension (<kbd>1</kbd>) or not (<kbd>0</kbd>). Tensions are controversial
issues rooted in disagreements related to states' interests and values.</p>
<h3>Schema</h3>
<ul>
  <li><strong>Tension (1)</strong> — there is a controversy between
  participants of the discussion, and the controversy relates to the interests
  or values of at least one actor taking part in it.</li>
  <li><strong>No tension (0)</strong> — there is no controversy, or there is
  one but it does not relate to the interests or values of any participating
  actor (purely procedural or rhetorical disagreement).</li>
</ul>
<h3>Instructions</h3>
<ul>
  <li>Judge each paragraph solely on its own content; do not consider other
  parts of the document or external sources.</li>
  <li>Avoid assumptions or inferences beyond what is explicitly stated.</li>
  <li>When a paragraph mixes tense and non-tense elements, classify by the
  dominant tone.</li>
  <li>If a paragraph is ambiguous, use <em>skip</em> to set it aside for a
  second look before submitting the batch.</li>
</ul>
`;
