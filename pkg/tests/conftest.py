import numpy as np
import pytest

from tensioncorpus.annotation import AnnotationLabel
from tensioncorpus.ingest import (
    Actor,
    Paragraph,
    SessionRef,
    default_lexicon,
    load_profile,
    paragraph_id,
)
from tensioncorpus.store import Corpus


@pytest.fixture(scope="session")
def modern_profile():
    return load_profile("modern")


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


def make_paragraph(session, ordinal, text, speaker=None, language="En", score=None):
    return Paragraph(
        id=paragraph_id(session, ordinal, text),
        session=session,
        ordinal=ordinal,
        raw_text=text,
        clean_text=text,
        language=language,
        speaker=speaker,
        tension_score=score,
    )


def make_corpus(n=12, seed=0, dimension=16, with_labels=False):
    """Synthetic two-session corpus with embeddings and optional labels."""
    rng = np.random.default_rng(seed)
    sessions = [
        SessionRef("WHC", 35, "Ordinary", 2011),
        SessionRef("ICHC", 12, "Ordinary", 2017),
    ]
    speakers = [
        Actor("Role", "Chairperson"),
        Actor("StateDelegation", "Norway"),
        Actor("Organisation", "ICOMOS"),
        None,
    ]
    corpus = Corpus()
    vectors = {}
    for i in range(n):
        session = sessions[i % 2]
        p = make_paragraph(
            session,
            ordinal=i // 2,
            text=f"Paragraph {i} discussed conservation item {i % 5}.",
            speaker=speakers[i % len(speakers)],
            language="Fr" if i % 5 == 4 else "En",
            score=float(rng.uniform()) if i % 3 else None,
        )
        corpus.add_paragraphs([p])
        vec = rng.normal(size=dimension)
        vectors[p.id] = vec / np.linalg.norm(vec)
    provider_id = f"hash-{dimension}"
    corpus.embeddings[provider_id] = vectors
    if with_labels:
        for i, pid in enumerate(sorted(corpus.paragraphs)[: n // 2]):
            corpus.labels.add(
                AnnotationLabel(paragraph_id=pid, annotator_id="a1", value=i % 2)
            )
    return corpus
