"""Annotation storage, inter-annotator agreement, adjudication and the
uncertainty-sampling active-learning loop."""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass, field, replace
from pathlib import Path

STAGES = ("Initial", "ActiveLearning", "Adjudicated")
DEFAULT_BATCH_SIZE = 20
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class AnnotationLabel:
    paragraph_id: str
    annotator_id: str
    value: int
    stage: str = "Initial"
    timestamp: str = ""

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError("label value must be 0 or 1")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage: {self.stage!r}")


class AdjudicationConflict(RuntimeError):
    pass


class UnknownParagraph(KeyError):
    pass


class LabelStore:
    """In-memory label set with at most one non-adjudicated label per
    (paragraph, annotator); an Adjudicated label supersedes all others."""

    def __init__(self, known_paragraphs: set[str] | None = None):
        self.known_paragraphs = known_paragraphs
        self._labels: dict[tuple[str, str], AnnotationLabel] = {}
        self._adjudicated: dict[str, AnnotationLabel] = {}

    def add(self, label: AnnotationLabel) -> None:
        if self.known_paragraphs is not None and label.paragraph_id not in self.known_paragraphs:
            raise UnknownParagraph(label.paragraph_id)
        if label.stage == "Adjudicated":
            if label.paragraph_id in self._adjudicated:
                raise AdjudicationConflict(
                    f"{label.paragraph_id} already adjudicated; revise explicitly"
                )
            self._adjudicated[label.paragraph_id] = label
        else:
            self._labels[(label.paragraph_id, label.annotator_id)] = label

    def labels_for(self, paragraph_id: str) -> list[AnnotationLabel]:
        out = [l for (pid, _), l in self._labels.items() if pid == paragraph_id]
        if paragraph_id in self._adjudicated:
            out.append(self._adjudicated[paragraph_id])
        return out

    def effective_label(self, paragraph_id: str) -> int | None:
        """Adjudicated value wins; otherwise unanimous annotator value;
        disagreement or no labels -> None (excluded from training)."""
        if paragraph_id in self._adjudicated:
            return self._adjudicated[paragraph_id].value
        values = {
            l.value for (pid, _), l in self._labels.items() if pid == paragraph_id
        }
        if len(values) == 1:
            return values.pop()
        return None

    def labelled_ids(self) -> set[str]:
        ids = {pid for pid, _ in self._labels}
        ids.update(self._adjudicated)
        return ids

    def all_labels(self) -> list[AnnotationLabel]:
        return list(self._labels.values()) + list(self._adjudicated.values())

    def annotator_vectors(
        self, annotator_a: str, annotator_b: str
    ) -> tuple[list[int], list[int]]:
        """Aligned non-adjudicated label lists over commonly labelled paragraphs."""
        a_map = {
            pid: l.value for (pid, ann), l in self._labels.items() if ann == annotator_a
        }
        b_map = {
            pid: l.value for (pid, ann), l in self._labels.items() if ann == annotator_b
        }
        common = sorted(set(a_map) & set(b_map))
        return [a_map[p] for p in common], [b_map[p] for p in common]


def adjudicate(
    store: LabelStore, paragraph_id: str, final_value: int, adjudicator_id: str
) -> AnnotationLabel:
    """Write the consensus label; errors if the paragraph is unknown or was
    already adjudicated to a different value."""
    if store.known_paragraphs is not None and paragraph_id not in store.known_paragraphs:
        raise UnknownParagraph(paragraph_id)
    label = AnnotationLabel(
        paragraph_id=paragraph_id,
        annotator_id=adjudicator_id,
        value=final_value,
        stage="Adjudicated",
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )
    store.add(label)
    return label


def cohen_kappa(labels_a: list[int], labels_b: list[int]) -> float:
    """Chance-corrected agreement between two annotators.

    kappa = (p_o - p_e) / (1 - p_e); when p_e = 1 the statistic is defined
    as 1 for perfect agreement and 0 otherwise.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError("label lists must have equal length")
    if not labels_a:
        raise ValueError("label lists must be non-empty")
    n = len(labels_a)
    p_o = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    categories = set(labels_a) | set(labels_b)
    p_e = sum(
        (labels_a.count(k) / n) * (labels_b.count(k) / n) for k in categories
    )
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def select_uncertain(
    scores: dict[str, float],
    batch_size: int = DEFAULT_BATCH_SIZE,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[str]:
    """The batch_size ids with probability closest to the threshold;
    distance ties break by ascending paragraph id."""
    for pid, p in scores.items():
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability for {pid!r} outside [0,1]: {p}")
    ranked = sorted(scores, key=lambda pid: (abs(scores[pid] - threshold), pid))
    return ranked[:batch_size]


@dataclass(frozen=True)
class ALState:
    round: int = 0
    batch_size: int = DEFAULT_BATCH_SIZE
    threshold: float = DEFAULT_THRESHOLD
    pending_ids: tuple[str, ...] = ()


class RoundMismatch(RuntimeError):
    pass


def al_round(
    scores: dict[str, float],
    state: ALState,
    new_labels: dict[str, int],
    labelled_ids: set[str],
) -> tuple[dict[str, int], ALState]:
    """Close the current round and open the next.

    new_labels must cover exactly the previous round's pending ids. Returns
    the accepted labels (to merge into the training set; retraining is the
    caller's job) and the next state with a fresh uncertain batch drawn from
    the still-unlabelled pool.
    """
    if set(new_labels) != set(state.pending_ids):
        raise RoundMismatch(
            f"labels cover {sorted(new_labels)}, pending was {sorted(state.pending_ids)}"
        )
    now_labelled = labelled_ids | set(new_labels)
    pool = {pid: p for pid, p in scores.items() if pid not in now_labelled}
    next_batch = select_uncertain(pool, state.batch_size, state.threshold)
    next_state = replace(
        state, round=state.round + 1, pending_ids=tuple(next_batch)
    )
    return dict(new_labels), next_state


# ---------------------------------------------------------------------------
# CSV import/export

_CSV_COLUMNS = ["paragraph_id", "annotator_id", "value", "stage", "timestamp"]


def export_labels_csv(store: LabelStore, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for label in sorted(
            store.all_labels(), key=lambda l: (l.paragraph_id, l.annotator_id, l.stage)
        ):
            writer.writerow(
                dict(
                    paragraph_id=label.paragraph_id,
                    annotator_id=label.annotator_id,
                    value=label.value,
                    stage=label.stage,
                    timestamp=label.timestamp,
                )
            )


def import_labels_csv(path: str | Path, store: LabelStore | None = None) -> LabelStore:
    store = store or LabelStore()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not set(_CSV_COLUMNS) <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {','.join(_CSV_COLUMNS)}")
        for row in reader:
            store.add(
                AnnotationLabel(
                    paragraph_id=row["paragraph_id"],
                    annotator_id=row["annotator_id"],
                    value=int(row["value"]),
                    stage=row["stage"] or "Initial",
                    timestamp=row["timestamp"] or "",
                )
            )
    return store
