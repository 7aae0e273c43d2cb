"""HTTP service exposing search, related paragraphs, annotation, active
learning, training and metrics endpoints over one corpus store."""

from __future__ import annotations

import threading
import uuid
from dataclasses import asdict

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import annotation as ann
from . import classifier as clf
from . import embed
from . import store as corpus_store

DEFAULT_LIMIT = 50
MAX_LIMIT = 500
DEFAULT_K = 10


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        self.status = status
        self.code = code
        self.detail = detail
        super().__init__(detail)


def _paragraph_view(state: "AppState", p) -> dict:
    topic_keywords = None
    if p.topic_id is not None:
        topic = state.topics_by_id.get(p.topic_id)
        if topic is not None:
            topic_keywords = [k for k, _ in topic.keywords[:5]]
    return dict(
        id=p.id,
        session=p.session.label,
        ordinal=p.ordinal,
        text=p.clean_text,
        speaker=p.speaker.name if p.speaker else None,
        tension_score=p.tension_score,
        topic_keywords=topic_keywords,
    )


class AppState:
    def __init__(
        self,
        corpus: corpus_store.Corpus,
        store_path: str | None,
        provider_id: str,
        sync_train: bool = False,
        seed: int = 0,
    ):
        self.corpus = corpus
        self.store_path = store_path
        self.provider_id = provider_id
        self.sync_train = sync_train
        self.seed = seed
        self.lock = threading.Lock()
        self.training_thread: threading.Thread | None = None
        self.model: clf.TensionModelParams | None = None
        self.model_id: str | None = None
        self.metrics: dict | None = None
        self.test_ids: set[str] = set()
        self.al_state = ann.ALState()
        self.al_history: list[dict] = []
        self.topics_by_id = {t.id: t for t in corpus.topics}

    # -- embeddings -------------------------------------------------------

    def vectors(self) -> dict[str, embed.EmbeddingVector]:
        raw = self.corpus.embeddings.get(self.provider_id, {})
        return {
            pid: embed.EmbeddingVector(vec, self.provider_id)
            for pid, vec in raw.items()
        }

    def raw_vectors(self) -> dict[str, np.ndarray]:
        return self.corpus.embeddings.get(self.provider_id, {})

    # -- training ---------------------------------------------------------

    def labelled_dataset(self) -> clf.LabelledDataset:
        vectors = self.raw_vectors()
        items = []
        for pid in sorted(self.corpus.labels.labelled_ids()):
            value = self.corpus.labels.effective_label(pid)
            if value is None or pid not in vectors or pid not in self.corpus.paragraphs:
                continue
            p = self.corpus.paragraphs[pid]
            items.append(
                clf.LabelledItem(
                    embedding=vectors[pid],
                    label=value,
                    paragraph_id=pid,
                    session=p.session.label,
                    ordinal=p.ordinal,
                )
            )
        return clf.LabelledDataset(items)

    def run_training(self, overrides: dict) -> dict:
        dataset = self.labelled_dataset()
        if len(dataset) == 0:
            raise ApiError(409, "no_labelled_data", "no labelled, embedded paragraphs")
        input_dim = dataset.items[0].embedding.shape[0]
        config = clf.HeadConfig(input_dim=input_dim, seed=self.seed, **overrides)
        train_set, test_set = clf.split_dataset(
            dataset, ratio=0.8, seed=self.seed, stratified=self._stratifiable(dataset)
        )
        params, history = clf.train(train_set, config)
        metrics = clf.evaluate(params, test_set if len(test_set) else train_set)
        with self.lock:
            self.model = params
            self.model_id = uuid.uuid4().hex
            self.test_ids = {item.paragraph_id for item in test_set.items}
            self.metrics = dict(
                model_id=self.model_id,
                config=asdict(config),
                epochs_run=len(history),
                **metrics.as_dict(),
            )
        self.rescore_corpus()
        return self.metrics

    @staticmethod
    def _stratifiable(dataset: clf.LabelledDataset) -> bool:
        labels = {item.label for item in dataset.items}
        return labels == {0, 1}

    def rescore_corpus(self) -> None:
        """Recompute and persist tension scores corpus-wide so search by
        tension never needs the model in the request path."""
        if self.model is None:
            return
        vectors = self.raw_vectors()
        ids = sorted(set(vectors) & set(self.corpus.paragraphs))
        if not ids:
            return
        matrix = np.stack([vectors[pid] for pid in ids])
        scores = clf.predict_scores(self.model, matrix)
        for pid, score in zip(ids, scores):
            self.corpus.paragraphs[pid].tension_score = float(score)
        if self.store_path:
            corpus_store.save_corpus(self.corpus, self.store_path)

    # -- active learning --------------------------------------------------

    def candidate_scores(self) -> dict[str, float]:
        vectors = self.raw_vectors()
        labelled = self.corpus.labels.labelled_ids()
        pool = [
            pid
            for pid in sorted(vectors)
            if pid not in labelled
            and pid not in self.test_ids
            and pid in self.corpus.paragraphs
        ]
        if not pool:
            return {}
        if self.model is not None:
            matrix = np.stack([vectors[pid] for pid in pool])
            probabilities = clf.predict_scores(self.model, matrix)
            return {pid: float(p) for pid, p in zip(pool, probabilities)}
        # no model yet: every candidate is maximally uncertain
        return {pid: 0.5 for pid in pool}

    def open_batch(self) -> ann.ALState:
        if not self.al_state.pending_ids:
            batch = ann.select_uncertain(
                self.candidate_scores(),
                self.al_state.batch_size,
                self.al_state.threshold,
            )
            self.al_state = ann.ALState(
                round=self.al_state.round,
                batch_size=self.al_state.batch_size,
                threshold=self.al_state.threshold,
                pending_ids=tuple(batch),
            )
        return self.al_state


def create_app(
    corpus: corpus_store.Corpus,
    store_path: str | None = None,
    provider_id: str = "hash-512",
    sync_train: bool = False,
    cors_origin: str | None = None,
    seed: int = 0,
) -> FastAPI:
    state = AppState(corpus, store_path, provider_id, sync_train=sync_train, seed=seed)
    app = FastAPI(title="tensioncorpus", version="0.1.0")
    app.state.engine = state
    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content=dict(code=exc.code, detail=exc.detail)
        )

    # -- search -----------------------------------------------------------

    @app.get("/paragraphs")
    def list_paragraphs(
        session: str | None = None,
        actor: str | None = None,
        order: str = "date",
        limit: str = str(DEFAULT_LIMIT),
    ):
        if order not in ("date", "tension"):
            raise ApiError(400, "bad_order", f"order must be date or tension, got {order!r}")
        try:
            limit_n = int(limit)
        except ValueError:
            raise ApiError(400, "bad_limit", f"limit must be an integer, got {limit!r}")
        if limit_n < 0 or limit_n > MAX_LIMIT:
            raise ApiError(400, "bad_limit", f"limit must lie in [0, {MAX_LIMIT}]")
        results = corpus_store.query(
            state.corpus,
            session=session,
            actor=actor,
            order="ByTension" if order == "tension" else "ByDate",
            limit=limit_n,
        )
        return [_paragraph_view(state, p) for p in results]

    @app.get("/paragraphs/{paragraph_id}/related")
    def related(paragraph_id: str, k: str = str(DEFAULT_K)):
        try:
            k_n = int(k)
        except ValueError:
            raise ApiError(400, "bad_k", f"k must be an integer, got {k!r}")
        if k_n < 1:
            raise ApiError(400, "bad_k", "k must be >= 1")
        if paragraph_id not in state.corpus.paragraphs:
            raise ApiError(404, "unknown_paragraph", f"no paragraph {paragraph_id!r}")
        vectors = state.vectors()
        if paragraph_id not in vectors:
            raise ApiError(
                409,
                "unembedded_paragraph",
                f"paragraph {paragraph_id!r} has no embedding; run the embed step",
            )
        neighbors = embed.nearest_neighbors(paragraph_id, k_n, vectors)
        return [
            dict(
                _paragraph_view(state, state.corpus.paragraphs[pid]),
                similarity=similarity,
            )
            for pid, similarity in neighbors
            if pid in state.corpus.paragraphs
        ]

    # -- active learning ---------------------------------------------------

    @app.get("/active-learning/batch")
    def al_batch():
        al_state = state.open_batch()
        return dict(
            round=al_state.round,
            batch_size=al_state.batch_size,
            pending=[
                _paragraph_view(state, state.corpus.paragraphs[pid])
                for pid in al_state.pending_ids
            ],
        )

    @app.post("/annotations")
    def post_annotations(body: dict):
        labels = body.get("labels")
        if not isinstance(labels, list) or not labels:
            raise ApiError(422, "bad_labels", "body must carry a non-empty labels list")
        pending = set(state.al_state.pending_ids)
        parsed = []
        for row in labels:
            pid = row.get("paragraph_id")
            value = row.get("value")
            annotator = row.get("annotator_id", "anonymous")
            if value not in (0, 1):
                raise ApiError(422, "bad_value", f"label value must be 0 or 1, got {value!r}")
            if pid not in pending:
                raise ApiError(422, "not_pending", f"paragraph {pid!r} is not pending")
            parsed.append((pid, annotator, value))

        already = state.corpus.labels.labelled_ids()
        for pid, annotator, value in parsed:
            if pid in already:
                continue  # idempotent resubmission
            state.corpus.labels.add(
                ann.AnnotationLabel(
                    paragraph_id=pid,
                    annotator_id=annotator,
                    value=value,
                    stage="ActiveLearning",
                )
            )

        labelled = state.corpus.labels.labelled_ids()
        remaining = [pid for pid in state.al_state.pending_ids if pid not in labelled]
        round_complete = not remaining
        retrained = False
        if round_complete and state.al_state.pending_ids:
            closed_round = state.al_state.round
            state.al_history.append(
                dict(round=closed_round, labelled=len(state.al_state.pending_ids))
            )
            state.al_state = ann.ALState(
                round=closed_round + 1,
                batch_size=state.al_state.batch_size,
                threshold=state.al_state.threshold,
                pending_ids=(),
            )
            retrained = _trigger_training(state, {}, wait=state.sync_train)
        return dict(
            accepted=len(parsed),
            round_complete=round_complete,
            remaining=len(remaining),
            retraining=retrained,
        )

    # -- training and metrics ----------------------------------------------

    @app.post("/train")
    def train_endpoint(body: dict | None = None):
        overrides = dict(body or {})
        overrides.pop("input_dim", None)
        with state.lock:
            if state.training_thread is not None and state.training_thread.is_alive():
                raise ApiError(409, "training_in_progress", "a training job is already running")
        job_id = uuid.uuid4().hex
        if state.sync_train:
            metrics = state.run_training(overrides)
            return dict(job_id=job_id, status="completed", model_id=metrics["model_id"])
        thread = threading.Thread(
            target=state.run_training, args=(overrides,), daemon=True
        )
        with state.lock:
            state.training_thread = thread
        thread.start()
        return dict(job_id=job_id, status="started")

    @app.get("/models/current/metrics")
    def current_metrics():
        if state.metrics is None:
            raise ApiError(404, "no_model", "no trained model; run training first")
        return dict(state.metrics, al_rounds=list(state.al_history))

    return app


def _trigger_training(state: AppState, overrides: dict, wait: bool) -> bool:
    with state.lock:
        if state.training_thread is not None and state.training_thread.is_alive():
            return False
    if wait:
        state.run_training(overrides)
        return True
    thread = threading.Thread(target=state.run_training, args=(overrides,), daemon=True)
    with state.lock:
        state.training_thread = thread
    thread.start()
    return True
