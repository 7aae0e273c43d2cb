"""Operator command line: ingestion, embedding, topic modelling, training,
evaluation, active-learning administration, stats, report export, serving.

Exit codes: 0 success, 1 domain error, 2 usage error. Diagnostics go to
stderr, machine-readable output to stdout. Every randomized subcommand takes
an explicit --seed (default 0) so runs are reproducible.
"""

from __future__ import annotations

import csv
import json
import sys
from itertools import combinations
from pathlib import Path

import click
import numpy as np

from . import annotation as ann
from . import classifier as clf
from . import embed as embed_mod
from . import ingest as ingest_mod
from . import store as store_mod
from . import topics as topics_mod
from .preprocess import default_filter_config, preprocess_for_topics


def _load_store(path: str) -> store_mod.Corpus:
    try:
        return store_mod.load_corpus(path)
    except (FileNotFoundError, store_mod.IntegrityError, store_mod.VersionError) as exc:
        raise click.ClickException(str(exc))


@click.group()
def main():
    """Corpus analysis engine for committee summary records."""


@main.command("ingest")
@click.argument("sources", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--profile", default="modern", show_default=True, help="split rule set")
@click.option("--out", "out_path", required=True, type=click.Path(), help="store directory")
@click.option("--year", type=int, default=None, help="override the derived session year")
def ingest_cmd(sources, profile, out_path, year):
    """Parse transcript text files into a paragraph store."""
    try:
        split_profile = ingest_mod.load_profile(profile)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    corpus = store_mod.Corpus()
    if Path(out_path, "manifest.json").exists():
        corpus = _load_store(out_path)
    count = 0
    for source in sources:
        source = Path(source)
        files = sorted(source.glob("*.txt")) if source.is_dir() else [source]
        for path in files:
            try:
                session = ingest_mod.session_from_filename(path.name, year=year)
            except ValueError as exc:
                raise click.ClickException(str(exc))
            text = path.read_text(encoding="utf-8")
            paragraphs = ingest_mod.ingest_document(text, session, split_profile)
            corpus.add_paragraphs(paragraphs)
            count += len(paragraphs)
            click.echo(f"{path.name}: {len(paragraphs)} paragraphs", err=True)
    store_mod.save_corpus(corpus, out_path)
    click.echo(json.dumps(dict(paragraphs=count, sessions=len(corpus.sessions))))


@main.command("embed")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--dimension", default=embed_mod.DEFAULT_HASH_DIM, show_default=True)
def embed_cmd(store_path, dimension):
    """Compute hashing-provider embeddings for every paragraph."""
    corpus = _load_store(store_path)
    config = default_filter_config()
    bags = {
        pid: preprocess_for_topics(p.clean_text, config)
        for pid, p in corpus.paragraphs.items()
    }
    idf = embed_mod.build_idf_table(list(bags.values()))
    provider = embed_mod.hashing_provider(dimension)
    vectors = {
        pid: embed_mod.hash_embed(bag, dimension, idf).values
        for pid, bag in bags.items()
    }
    corpus.providers[provider.id] = provider
    corpus.embeddings[provider.id] = vectors
    store_mod.save_corpus(corpus, store_path)
    click.echo(json.dumps(dict(provider=provider.id, embedded=len(vectors))))


@main.command("topics")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=topics_mod.DEFAULT_K, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--top-n", default=topics_mod.DEFAULT_TOP_N, show_default=True)
@click.option("--provider", default=None, help="embedding provider id")
def topics_cmd(store_path, k, seed, top_n, provider):
    """Cluster embedded paragraphs into topics and extract keywords."""
    corpus = _load_store(store_path)
    provider = provider or (sorted(corpus.embeddings) or [None])[0]
    if provider is None or provider not in corpus.embeddings:
        raise click.ClickException("no embeddings in store; run embed first")
    config = default_filter_config()
    ids, vectors, bags = [], [], []
    for pid in sorted(corpus.embeddings[provider]):
        if pid not in corpus.paragraphs:
            continue
        bag = preprocess_for_topics(corpus.paragraphs[pid].clean_text, config)
        if not bag.counts:
            continue  # empty bags carry no topic
        ids.append(pid)
        vectors.append(corpus.embeddings[provider][pid])
        bags.append(bag)
    if k > len(ids):
        raise click.ClickException(f"k={k} exceeds {len(ids)} clusterable paragraphs")
    topic_list = topics_mod.assign_topics(ids, vectors, bags, k=k, seed=seed, top_n=top_n)
    corpus.topics = topic_list
    for topic in topic_list:
        for pid in topic.member_ids:
            corpus.paragraphs[pid].topic_id = topic.id
    store_mod.save_corpus(corpus, store_path)
    click.echo(json.dumps(dict(topics=len(topic_list), clustered=len(ids))))


def _labelled_dataset(corpus: store_mod.Corpus, provider: str) -> clf.LabelledDataset:
    vectors = corpus.embeddings.get(provider, {})
    items = []
    for pid in sorted(corpus.labels.labelled_ids()):
        value = corpus.labels.effective_label(pid)
        if value is None or pid not in vectors or pid not in corpus.paragraphs:
            continue
        p = corpus.paragraphs[pid]
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


def _pick_provider(corpus: store_mod.Corpus, provider: str | None) -> str:
    provider = provider or (sorted(corpus.embeddings) or [None])[0]
    if provider is None or provider not in corpus.embeddings:
        raise click.ClickException("no embeddings in store; run embed first")
    return provider


@main.command("train")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=12, show_default=True)
@click.option("--blocks", default=1, show_default=True)
@click.option("--hidden-dim", default=256, show_default=True)
@click.option("--dropout", default=0.4, show_default=True)
@click.option("--pos-weight", default=2.0, show_default=True)
@click.option("--learning-rate", default=0.0005, show_default=True)
@click.option("--weight-decay", default=0.0001, show_default=True)
@click.option("--drop-intro", default=0, show_default=True, help="undersample: drop first N per session")
@click.option("--init-checkpoint", type=click.Path(exists=True), default=None,
              help="pre-fine-tuned checkpoint to start from")
@click.option("--provider", default=None)
def train_cmd(store_path, seed, epochs, blocks, hidden_dim, dropout, pos_weight,
              learning_rate, weight_decay, drop_intro, init_checkpoint, provider):
    """Train the tension head on the store's labelled paragraphs."""
    corpus = _load_store(store_path)
    provider = _pick_provider(corpus, provider)
    dataset = _labelled_dataset(corpus, provider)
    if len(dataset) == 0:
        raise click.ClickException("no labelled, embedded paragraphs to train on")
    config = clf.HeadConfig(
        input_dim=dataset.items[0].embedding.shape[0],
        blocks=blocks,
        hidden_dim=hidden_dim,
        dropout_p=dropout,
        pos_weight=pos_weight,
        learning_rate=learning_rate,
        weight_decay=weight_decay,
        epochs=epochs,
        seed=seed,
    )
    stratified = {item.label for item in dataset.items} == {0, 1}
    train_set, test_set = clf.split_dataset(dataset, 0.8, seed=seed, stratified=stratified)
    if drop_intro:
        train_set = clf.undersample_drop_intro(train_set, drop_intro)
    init = clf.load_checkpoint(init_checkpoint) if init_checkpoint else None
    try:
        params, history = clf.train(train_set, config, init=init)
    except clf.TrainingDiverged as exc:
        raise click.ClickException(str(exc))
    checkpoint_dir = Path(store_path) / "checkpoints"
    checkpoint_dir.mkdir(exist_ok=True)
    checkpoint = checkpoint_dir / "current.ckpt"
    clf.save_checkpoint(params, checkpoint)
    # persist corpus-wide tension scores for search
    vectors = corpus.embeddings[provider]
    ids = sorted(set(vectors) & set(corpus.paragraphs))
    if ids:
        scores = clf.predict_scores(params, np.stack([vectors[pid] for pid in ids]))
        for pid, score in zip(ids, scores):
            corpus.paragraphs[pid].tension_score = float(score)
        store_mod.save_corpus(corpus, store_path)
    metrics = clf.evaluate(params, test_set if len(test_set) else train_set)
    click.echo(
        json.dumps(
            dict(
                checkpoint=str(checkpoint),
                train_size=len(train_set),
                test_size=len(test_set),
                final_train_loss=history[-1]["loss"] if history else None,
                **metrics.as_dict(),
            )
        )
    )


@main.command("eval")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--provider", default=None)
def eval_cmd(store_path, checkpoint, provider):
    """Evaluate a checkpoint on all labelled paragraphs in the store."""
    corpus = _load_store(store_path)
    provider = _pick_provider(corpus, provider)
    checkpoint = checkpoint or str(Path(store_path) / "checkpoints" / "current.ckpt")
    try:
        params = clf.load_checkpoint(checkpoint)
    except (FileNotFoundError, clf.CheckpointError) as exc:
        raise click.ClickException(str(exc))
    dataset = _labelled_dataset(corpus, provider)
    if len(dataset) == 0:
        raise click.ClickException("no labelled, embedded paragraphs to evaluate")
    metrics = clf.evaluate(params, dataset)
    click.echo(json.dumps(metrics.as_dict()))


@main.command("al-next")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--batch-size", default=ann.DEFAULT_BATCH_SIZE, show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--provider", default=None)
def al_next_cmd(store_path, batch_size, checkpoint, provider):
    """Select the next uncertainty-sampled batch for annotation."""
    corpus = _load_store(store_path)
    provider = _pick_provider(corpus, provider)
    checkpoint = checkpoint or str(Path(store_path) / "checkpoints" / "current.ckpt")
    try:
        params = clf.load_checkpoint(checkpoint)
    except (FileNotFoundError, clf.CheckpointError) as exc:
        raise click.ClickException(str(exc))
    vectors = corpus.embeddings[provider]
    labelled = corpus.labels.labelled_ids()
    pool = sorted(pid for pid in vectors if pid not in labelled and pid in corpus.paragraphs)
    if not pool:
        click.echo(json.dumps(dict(batch=[])))
        return
    scores = clf.predict_scores(params, np.stack([vectors[pid] for pid in pool]))
    score_map = {pid: float(s) for pid, s in zip(pool, scores)}
    batch = ann.select_uncertain(score_map, batch_size, params.config.threshold)
    click.echo(json.dumps(dict(batch=batch, scores={pid: score_map[pid] for pid in batch})))


@main.command("al-import")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
def al_import_cmd(csv_path, store_path):
    """Import annotator labels and report Cohen's kappa per annotator pair."""
    corpus = _load_store(store_path)
    try:
        ann.import_labels_csv(csv_path, corpus.labels)
    except (ValueError, ann.AdjudicationConflict) as exc:
        raise click.ClickException(str(exc))
    store_mod.save_corpus(corpus, store_path)
    annotators = sorted(
        {l.annotator_id for l in corpus.labels.all_labels() if l.stage != "Adjudicated"}
    )
    kappas = {}
    for a, b in combinations(annotators, 2):
        labels_a, labels_b = corpus.labels.annotator_vectors(a, b)
        if labels_a:
            kappas[f"{a}|{b}"] = ann.cohen_kappa(labels_a, labels_b)
    click.echo(json.dumps(dict(imported=len(corpus.labels.all_labels()), kappa=kappas)))


def _coverage_rows(corpus: store_mod.Corpus) -> list[dict]:
    rows = []
    for label in sorted(corpus.sessions):
        paragraphs = corpus.by_session(label)
        rows.append(
            dict(
                session=label,
                paragraphs=len(paragraphs),
                speaker_coverage=ingest_mod.speaker_coverage(paragraphs),
            )
        )
    return rows


def _class_balance_rows(corpus: store_mod.Corpus) -> list[dict]:
    per_session: dict[str, list[int]] = {}
    for pid in sorted(corpus.labels.labelled_ids()):
        value = corpus.labels.effective_label(pid)
        if value is None:
            continue
        session = pid.split(":")[0]
        counts = per_session.setdefault(session, [0, 0])
        counts[value] += 1
    return [
        dict(session=s, negatives=c[0], positives=c[1], total=c[0] + c[1])
        for s, c in sorted(per_session.items())
    ]


@main.command("stats")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--speakers", is_flag=True, help="per-session speaker coverage")
def stats_cmd(store_path, speakers):
    """Corpus statistics."""
    corpus = _load_store(store_path)
    if speakers:
        click.echo(json.dumps(_coverage_rows(corpus)))
    else:
        click.echo(
            json.dumps(
                dict(
                    sessions=len(corpus.sessions),
                    paragraphs=len(corpus.paragraphs),
                    labelled=len(corpus.labels.labelled_ids()),
                    topics=len(corpus.topics),
                )
            )
        )


@main.command("export")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "text"]), default="csv",
              show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def export_cmd(store_path, fmt, out_dir):
    """Write per-session speaker-coverage and class-balance report tables."""
    corpus = _load_store(store_path)
    if not corpus.paragraphs and not corpus.labels.labelled_ids():
        raise click.ClickException("store is empty; nothing to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = dict(
        speaker_coverage=_coverage_rows(corpus),
        class_balance=_class_balance_rows(corpus),
    )
    written = []
    for name, rows in tables.items():
        if fmt == "csv":
            path = out / f"{name}.csv"
            with open(path, "w", newline="", encoding="utf-8") as handle:
                if rows:
                    writer = csv.DictWriter(handle, fieldnames=list(rows[0]))
                    writer.writeheader()
                    writer.writerows(rows)
        else:
            path = out / f"{name}.txt"
            lines = [" | ".join(f"{k}={v}" for k, v in row.items()) for row in rows]
            path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        written.append(str(path))
    click.echo(json.dumps(dict(files=written)))


@main.command("serve")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--provider", default="hash-512", show_default=True)
@click.option("--cors-origin", default=None, help="allowed UI origin")
@click.option("--seed", default=0, show_default=True)
def serve_cmd(store_path, host, port, provider, cors_origin, seed):
    """Serve the HTTP API over a corpus store."""
    import uvicorn

    from .api import create_app

    corpus = _load_store(store_path)
    app = create_app(
        corpus,
        store_path=store_path,
        provider_id=provider,
        cors_origin=cors_origin,
        seed=seed,
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
