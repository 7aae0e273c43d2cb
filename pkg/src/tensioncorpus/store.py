"""Durable persistence for sessions, paragraphs, embeddings, labels, topics
and model checkpoints.

Layout under the store root:
    manifest.json                 format version, sessions, providers, checksums
    paragraphs/{session}.jsonl    one JSON record per paragraph
    labels.csv                    annotation labels
    topics.jsonl                  one record per topic
    embeddings/{provider}.npz     vectors keyed by paragraph id
    checkpoints/                  model checkpoint files
    cache/                        external-embedding cache

Metadata is line-delimited text for diffability; vectors and checkpoints are
binary. Every file referenced by the manifest carries a sha256 checksum that
is verified on load, so a crash mid-save is caught as an integrity error
rather than read as a silently mixed state.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import LabelStore, export_labels_csv, import_labels_csv
from .embed import EmbeddingProvider
from .ingest import Actor, Paragraph, SessionRef
from .topics import Topic

FORMAT_VERSION = 1


class IntegrityError(RuntimeError):
    pass


class VersionError(RuntimeError):
    pass


@dataclass
class Corpus:
    sessions: dict[str, SessionRef] = field(default_factory=dict)  # by label
    paragraphs: dict[str, Paragraph] = field(default_factory=dict)  # by id
    topics: list[Topic] = field(default_factory=list)
    providers: dict[str, EmbeddingProvider] = field(default_factory=dict)
    embeddings: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    labels: LabelStore = field(default_factory=LabelStore)

    def add_paragraphs(self, paragraphs: list[Paragraph]) -> None:
        for p in paragraphs:
            self.sessions.setdefault(p.session.label, p.session)
            self.paragraphs[p.id] = p

    def by_session(self, label: str) -> list[Paragraph]:
        return sorted(
            (p for p in self.paragraphs.values() if p.session.label == label),
            key=lambda p: p.ordinal,
        )


# ---------------------------------------------------------------------------
# Serialization


def _paragraph_record(p: Paragraph) -> dict:
    return dict(
        id=p.id,
        session=dict(
            convention=p.session.convention,
            number=p.session.number,
            kind=p.session.kind,
            year=p.session.year,
        ),
        ordinal=p.ordinal,
        raw_text=p.raw_text,
        clean_text=p.clean_text,
        language=p.language,
        speaker=(dict(kind=p.speaker.kind, name=p.speaker.name) if p.speaker else None),
        tension_score=p.tension_score,
        topic_id=p.topic_id,
    )


def _paragraph_from_record(record: dict) -> Paragraph:
    s = record["session"]
    speaker = record.get("speaker")
    return Paragraph(
        id=record["id"],
        session=SessionRef(s["convention"], s["number"], s["kind"], s["year"]),
        ordinal=record["ordinal"],
        raw_text=record["raw_text"],
        clean_text=record["clean_text"],
        language=record["language"],
        speaker=Actor(speaker["kind"], speaker["name"]) if speaker else None,
        tension_score=record.get("tension_score"),
        topic_id=record.get("topic_id"),
    )


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_corpus(corpus: Corpus, path: str | Path) -> dict:
    """Write the store; every file goes through temp-file-plus-rename and the
    manifest (with checksums) is written last. Returns the manifest."""
    root = Path(path)
    (root / "paragraphs").mkdir(parents=True, exist_ok=True)
    (root / "embeddings").mkdir(exist_ok=True)
    (root / "checkpoints").mkdir(exist_ok=True)
    checksums: dict[str, str] = {}

    session_stems = {}
    for label, session in sorted(corpus.sessions.items()):
        stem = session.file_stem
        session_stems[label] = stem
        lines = [
            json.dumps(_paragraph_record(p), ensure_ascii=False, sort_keys=True)
            for p in corpus.by_session(label)
        ]
        data = ("\n".join(lines) + "\n" if lines else "").encode("utf-8")
        rel = f"paragraphs/{stem}.jsonl"
        _atomic_write(root / rel, data)
        checksums[rel] = _sha256(data)

    topic_lines = [
        json.dumps(
            dict(id=t.id, keywords=t.keywords, member_ids=t.member_ids),
            ensure_ascii=False,
            sort_keys=True,
        )
        for t in corpus.topics
    ]
    data = ("\n".join(topic_lines) + "\n" if topic_lines else "").encode("utf-8")
    _atomic_write(root / "topics.jsonl", data)
    checksums["topics.jsonl"] = _sha256(data)

    tmp_labels = root / "labels.csv.tmp"
    export_labels_csv(corpus.labels, tmp_labels)
    label_data = tmp_labels.read_bytes()
    tmp_labels.replace(root / "labels.csv")
    checksums["labels.csv"] = _sha256(label_data)

    for provider_id, vectors in sorted(corpus.embeddings.items()):
        buffer = io.BytesIO()
        np.savez(buffer, **vectors)
        data = buffer.getvalue()
        rel = f"embeddings/{provider_id}.npz"
        _atomic_write(root / rel, data)
        checksums[rel] = _sha256(data)

    manifest = dict(
        format_version=FORMAT_VERSION,
        sessions=[
            dict(
                label=label,
                convention=s.convention,
                number=s.number,
                kind=s.kind,
                year=s.year,
                paragraph_count=len(corpus.by_session(label)),
            )
            for label, s in sorted(corpus.sessions.items())
        ],
        providers=[
            dict(id=p.id, dimension=p.dimension, kind=p.kind, url=p.url)
            for p in sorted(corpus.providers.values(), key=lambda p: p.id)
        ],
        checksums=checksums,
    )
    _atomic_write(
        root / "manifest.json",
        json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8"),
    )
    return manifest


def load_corpus(path: str | Path) -> Corpus:
    """Load and verify a store; checksum or version failures name the file."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported store format_version {version}")

    for rel, expected in manifest["checksums"].items():
        file_path = root / rel
        if not file_path.exists():
            raise IntegrityError(f"missing store file: {rel}")
        if _sha256(file_path.read_bytes()) != expected:
            raise IntegrityError(f"checksum mismatch in {rel}")

    corpus = Corpus()
    for entry in manifest["sessions"]:
        session = SessionRef(
            entry["convention"], entry["number"], entry["kind"], entry["year"]
        )
        corpus.sessions[entry["label"]] = session
        rel = f"paragraphs/{session.file_stem}.jsonl"
        for line in (root / rel).read_text(encoding="utf-8").splitlines():
            if line.strip():
                p = _paragraph_from_record(json.loads(line))
                corpus.paragraphs[p.id] = p

    for entry in manifest["providers"]:
        corpus.providers[entry["id"]] = EmbeddingProvider(
            id=entry["id"],
            dimension=entry["dimension"],
            kind=entry["kind"],
            url=entry.get("url"),
        )

    topics_path = root / "topics.jsonl"
    if topics_path.exists():
        for line in topics_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                record = json.loads(line)
                corpus.topics.append(
                    Topic(
                        id=record["id"],
                        keywords=[(k, w) for k, w in record["keywords"]],
                        member_ids=record["member_ids"],
                    )
                )

    labels_path = root / "labels.csv"
    if labels_path.exists():
        corpus.labels = import_labels_csv(labels_path)

    for rel in manifest["checksums"]:
        if rel.startswith("embeddings/") and rel.endswith(".npz"):
            provider_id = rel[len("embeddings/") : -len(".npz")]
            with np.load(root / rel) as npz:
                corpus.embeddings[provider_id] = {k: npz[k] for k in npz.files}
    return corpus


# ---------------------------------------------------------------------------
# Queries

ORDERS = ("ByTension", "ByDate")


def query(
    corpus: Corpus,
    session: str | None = None,
    actor: str | None = None,
    language: str | None = None,
    labelled: bool | None = None,
    order: str = "ByDate",
    limit: int | None = None,
) -> list[Paragraph]:
    """Conjunctive filters, then order, then truncate.

    ByTension sorts tension_score descending with unscored paragraphs last;
    ByDate sorts by (session year, ordinal). Unknown session or actor names
    simply match nothing.
    """
    if order not in ORDERS:
        raise ValueError(f"unknown order {order!r}")
    results = list(corpus.paragraphs.values())
    if session is not None:
        results = [p for p in results if p.session.label == session]
    if actor is not None:
        needle = actor.lower()
        results = [
            p for p in results if p.speaker is not None and p.speaker.name.lower() == needle
        ]
    if language is not None:
        results = [p for p in results if p.language == language]
    if labelled is not None:
        labelled_ids = corpus.labels.labelled_ids()
        results = [p for p in results if (p.id in labelled_ids) == labelled]

    if order == "ByTension":
        results.sort(
            key=lambda p: (
                p.tension_score is None,
                -(p.tension_score if p.tension_score is not None else 0.0),
                p.id,
            )
        )
    else:
        results.sort(key=lambda p: (p.session.year, p.session.label, p.ordinal, p.id))
    if limit is not None:
        if limit < 0:
            raise ValueError("limit must be >= 0")
        results = results[:limit]
    return results


def corpora_equal(a: Corpus, b: Corpus) -> bool:
    """Structural equality, used by round-trip tests."""
    if a.sessions != b.sessions:
        return False
    if set(a.paragraphs) != set(b.paragraphs):
        return False
    for pid, p in a.paragraphs.items():
        if _paragraph_record(p) != _paragraph_record(b.paragraphs[pid]):
            return False
    if [(t.id, t.keywords, t.member_ids) for t in a.topics] != [
        (t.id, t.keywords, t.member_ids) for t in b.topics
    ]:
        return False
    if a.providers != b.providers:
        return False
    if set(a.embeddings) != set(b.embeddings):
        return False
    for provider_id, vectors in a.embeddings.items():
        other = b.embeddings[provider_id]
        if set(vectors) != set(other):
            return False
        for pid, vec in vectors.items():
            if not np.array_equal(vec, other[pid]):
                return False
    return sorted(map(repr, a.labels.all_labels())) == sorted(
        map(repr, b.labels.all_labels())
    )
