import json

import numpy as np
import pytest

from conftest import make_corpus
from tensioncorpus.annotation import AnnotationLabel
from tensioncorpus.store import (
    IntegrityError,
    VersionError,
    corpora_equal,
    load_corpus,
    query,
    save_corpus,
)
from tensioncorpus.topics import Topic


class TestRoundTrip:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_randomized_corpora(self, tmp_path, seed):
        corpus = make_corpus(n=10 + seed * 3, seed=seed, with_labels=True)
        corpus.topics = [Topic(id=0, keywords=[("dam", 1.5)], member_ids=["x"])]
        save_corpus(corpus, tmp_path)
        assert corpora_equal(load_corpus(tmp_path), corpus)

    def test_empty_corpus(self, tmp_path):
        corpus = make_corpus(n=0)
        save_corpus(corpus, tmp_path)
        loaded = load_corpus(tmp_path)
        assert loaded.paragraphs == {} and loaded.sessions == {}

    def test_save_is_idempotent(self, tmp_path):
        corpus = make_corpus()
        first = save_corpus(corpus, tmp_path)
        second = save_corpus(corpus, tmp_path)
        assert first == second


class TestCorruptionHandling:
    def test_checksum_mismatch(self, tmp_path):
        save_corpus(make_corpus(), tmp_path)
        target = next((tmp_path / "paragraphs").glob("*.jsonl"))
        target.write_text(target.read_text().replace("conservation", "conversation"))
        with pytest.raises(IntegrityError):
            load_corpus(tmp_path)

    def test_corrupt_embeddings(self, tmp_path):
        save_corpus(make_corpus(), tmp_path)
        target = next((tmp_path / "embeddings").glob("*.npz"))
        raw = bytearray(target.read_bytes())
        raw[-1] ^= 0xFF
        target.write_bytes(bytes(raw))
        with pytest.raises(IntegrityError):
            load_corpus(tmp_path)

    def test_missing_file(self, tmp_path):
        save_corpus(make_corpus(), tmp_path)
        (tmp_path / "labels.csv").unlink()
        with pytest.raises(IntegrityError):
            load_corpus(tmp_path)

    def test_unsupported_version(self, tmp_path):
        save_corpus(make_corpus(), tmp_path)
        manifest_path = tmp_path / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["format_version"] = 99
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(VersionError):
            load_corpus(tmp_path)

    def test_no_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_corpus(tmp_path / "nowhere")


class TestQuery:
    @pytest.fixture()
    def corpus(self):
        return make_corpus(n=12, with_labels=True)

    def test_session_filter(self, corpus):
        results = query(corpus, session="WHC-35")
        assert results and all(p.session.label == "WHC-35" for p in results)

    def test_actor_filter_case_insensitive(self, corpus):
        results = query(corpus, actor="chairperson")
        assert results and all(p.speaker.name == "Chairperson" for p in results)

    def test_unknown_names_match_nothing(self, corpus):
        assert query(corpus, session="WHC-99") == []
        assert query(corpus, actor="Atlantis") == []

    def test_language_filter(self, corpus):
        results = query(corpus, language="Fr")
        assert results and all(p.language == "Fr" for p in results)

    def test_labelled_filter(self, corpus):
        labelled_ids = corpus.labels.labelled_ids()
        assert {p.id for p in query(corpus, labelled=True)} == labelled_ids
        assert all(p.id not in labelled_ids for p in query(corpus, labelled=False))

    def test_conjunction(self, corpus):
        results = query(corpus, session="WHC-35", actor="Chairperson")
        for p in results:
            assert p.session.label == "WHC-35" and p.speaker.name == "Chairperson"

    def test_by_tension_order(self, corpus):
        results = query(corpus, order="ByTension")
        scores = [p.tension_score for p in results]
        scored = [s for s in scores if s is not None]
        assert scored == sorted(scored, reverse=True)
        # unscored paragraphs sort last
        assert scores[len(scored):] == [None] * (len(scores) - len(scored))

    def test_by_date_order(self, corpus):
        results = query(corpus, order="ByDate")
        keys = [(p.session.year, p.session.label, p.ordinal) for p in results]
        assert keys == sorted(keys)

    def test_limit(self, corpus):
        assert len(query(corpus, limit=3)) == 3
        assert query(corpus, limit=0) == []
        with pytest.raises(ValueError):
            query(corpus, limit=-1)

    def test_unknown_order(self, corpus):
        with pytest.raises(ValueError):
            query(corpus, order="ByMood")


class TestCorporaEqual:
    def test_detects_embedding_difference(self, tmp_path):
        a = make_corpus()
        b = make_corpus()
        assert corpora_equal(a, b)
        provider = next(iter(b.embeddings))
        pid = next(iter(b.embeddings[provider]))
        b.embeddings[provider][pid] = b.embeddings[provider][pid] + 1e-9
        assert not corpora_equal(a, b)

    def test_detects_label_difference(self):
        a = make_corpus()
        b = make_corpus()
        b.labels.add(AnnotationLabel("extra", "a1", 1))
        assert not corpora_equal(a, b)
