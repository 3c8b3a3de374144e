from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from conftest import annotated, constant_model, tiny_model
from summscore.corpus import AnnotatedExample, UnlabeledExample, aggregate_all, aggregate_expert_scores, prepare_split
from summscore.dimensions import QualityDimension
from summscore.harness import (
    HUMAN,
    LEARNED_METRIC,
    AblationSeries,
    LeaderboardRow,
    build_leaderboard,
    describe_table,
    export_diversity_scatter,
    leaderboard_csv,
    leaderboard_from_raw,
    load_external_scores,
    rounds_for_volumes,
    run_correlation_experiment,
    run_input_mode_ablation,
    run_volume_sweep,
    select_diverse,
    table_from_raw,
    write_run_artifacts,
)
from summscore.lexmetrics import BASELINE_METRICS
from summscore.persist import read_jsonl
from summscore.regressor import OptimizerConfig, predict_batch
from summscore.stats import correlate
from summscore.synthetic import make_affine_task, make_toy_corpus
from summscore.trainer import semi_supervised_train

DIMS = [d.value for d in QualityDimension]
OPT = OptimizerConfig(learning_rate=0.01, batch_size=4, epochs_per_round=2, seed=0)


@pytest.fixture(scope="module")
def toy():
    corpus = make_toy_corpus(n_docs=5, n_unlabeled_docs=3, seed=1)
    return corpus, aggregate_all(corpus.annotated)


def _models(**kw):
    return {d: tiny_model(d, dim=6, buckets=128, seed=i, **kw) for i, d in enumerate(DIMS)}


# -- correlation grid ----------------------------------------------------------------


def test_baselines_only_grid(toy):
    _, test = toy
    exp = run_correlation_experiment({}, test[:10])
    assert exp.table.metrics == list(BASELINE_METRICS)
    assert exp.table.dimensions == DIMS
    assert len(exp.table) == len(BASELINE_METRICS) * 4
    assert LEARNED_METRIC not in exp.table.metrics
    assert len(exp.raw) == 10 * 4 + 10 * len(BASELINE_METRICS)


def test_gold_copy_column_correlates_perfectly(toy, tmp_path):
    _, test = toy
    rows = [{"id": ex.id, "metric": "gold_copy", "dimension": d, "score": ex.gold(QualityDimension(d))}
            for ex in test for d in DIMS]
    path = tmp_path / "ext.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    exp = run_correlation_experiment({}, test, baselines=(), external=load_external_scores(path))
    for d in DIMS:
        cell = exp.table["gold_copy", d]
        assert cell.pearson == pytest.approx(1.0, abs=1e-12) and cell.spearman == pytest.approx(1.0, abs=1e-12)


def test_grid_recomputes_from_raw_rows(toy):
    _, test = toy
    exp = run_correlation_experiment(_models(), test, baselines=("rouge1", "bleu2", "tfidf"))
    assert exp.table.metrics == [LEARNED_METRIC, "rouge1", "bleu2", "tfidf"]
    # serialise and reload the raw rows: the audit path must reproduce every cell exactly
    rows = [json.loads(json.dumps(r)) for r in exp.raw]
    assert table_from_raw(rows).to_csv() == exp.table.to_csv()
    # and an independent reduce of the raw rows agrees
    for d in DIMS:
        human = [r["score"] for r in rows if r["metric"] == HUMAN and r["dimension"] == d]
        learned = [r["score"] for r in rows if r["metric"] == LEARNED_METRIC and r["dimension"] == d]
        assert exp.table[LEARNED_METRIC, d].pearson == pytest.approx(np.corrcoef(learned, human)[0, 1], abs=1e-12)
    system = run_correlation_experiment(_models(), test, baselines=("rouge1",), level="system")
    assert system.table[LEARNED_METRIC, "coherence"].n == 4
    assert table_from_raw(system.raw, "system").to_csv() == system.table.to_csv()
    assert "coherence" in describe_table(exp.table)


def test_grid_errors(toy):
    _, test = toy
    with pytest.raises(ValueError, match="trained for"):
        run_correlation_experiment({"coherence": tiny_model("fluency")}, test)
    with pytest.raises(ValueError, match="empty"):
        run_correlation_experiment({}, [])
    no_ref = [annotated(i, reference=None) for i in range(3)]
    with pytest.raises(ValueError, match="references"):
        run_correlation_experiment({}, no_ref)
    with pytest.raises(ValueError, match="no score"):
        run_correlation_experiment({}, test, baselines=(), external={"m": {test[0].id: 1.0}})


def test_external_score_file_validation(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text('{"id": "a", "metric": "m", "score": 1}\n{"id": "b", "metric": "m", "dimension": "fluency", "score": 2}\n')
    with pytest.raises(ValueError, match="mixes"):
        load_external_scores(path)
    path.write_text('{"id": "a", "metric": "m", "score": 1}\n{"id": "a", "metric": "m", "score": 2}\n')
    with pytest.raises(ValueError, match="duplicate"):
        load_external_scores(path)
    path.write_text('{"id": "a", "metric": "m"}\n')
    with pytest.raises(ValueError, match="malformed score row 1"):
        load_external_scores(path)
    path.write_text('{"id": "a", "metric": "m", "score": 1}\n{"id": "b", "metric": "n", "dimension": "Fluency", "score": 2}\n')
    assert load_external_scores(path) == {"m": {"a": 1.0}, "n": {"fluency": {"b": 2.0}}}


# -- volume sweep ---------------------------------------------------------------------


def _affine_split(k=2, n_unlabeled=40, dimension="consistency"):
    m0 = tiny_model(dimension, dim=6, buckets=128, seed=3)
    task = make_affine_task(m0, 30, n_unlabeled, 15, seed=3, noise=0.2)
    split = prepare_split(task.labeled + task.test, task.unlabeled, train_n=30, test_n=15, validation_n=8, k=k, seed=3)
    return m0, split


def test_volume_bookkeeping():
    m0, split = _affine_split(k=2)
    assert rounds_for_volumes(split, [0, 20, 40]) == [0, 1, 2]
    with pytest.raises(ValueError, match="strictly increasing"):
        rounds_for_volumes(split, [20, 20])
    with pytest.raises(ValueError, match="exceeds"):
        rounds_for_volumes(split, [0, 60])
    with pytest.raises(ValueError, match="whole number of parts"):
        rounds_for_volumes(split, [10])
    with pytest.raises(ValueError):
        rounds_for_volumes(split, [])


def test_volume_sweep_points_and_recomputation():
    m0, split = _affine_split(k=2)
    series, states, raw = run_volume_sweep(m0, split, OPT, "max_pearson", [0, 20, 40], fingerprint="abc")
    assert series.x == [0, 20, 40] and series.rounds == [0, 1, 2]
    assert [len(s.rounds) - 1 for s in states] == [0, 1, 2]
    assert [s.pool_sizes[-1] for s in states] == [len(split.train), len(split.train) + 20, len(split.train) + 40]
    # the zero-volume point is the supervised-only model
    best0, _ = semi_supervised_train(m0, split, OPT, "max_pearson", k=0)
    gold = [ex.gold(m0.dimension) for ex in split.test]
    assert series.pearson[0] == correlate(predict_batch(best0, split.test), gold).pearson
    for i, v in enumerate(series.x):
        pts = [r for r in raw if r["volume"] == v]
        res = correlate([r["score"] for r in pts], [r["gold"] for r in pts])
        assert (res.pearson, res.spearman) == (series.pearson[i], series.spearman[i])
    text = series.to_csv()
    assert text.startswith("# dimension=consistency config=abc\n") and len(text.splitlines()) == 5


def test_series_invariants():
    with pytest.raises(ValueError, match="misaligned"):
        AblationSeries([0, 1], [0.1], [0.1, 0.2])
    with pytest.raises(ValueError, match="strictly increasing"):
        AblationSeries([1, 1], [0.1, 0.2], [0.1, 0.2])


# -- input pairing ablation ---------------------------------------------------------


def test_input_mode_ablation_trails():
    m0, split = _affine_split(k=1)
    # make_affine_task emits no references: attach one per record
    def with_ref(ex):
        if isinstance(ex, AnnotatedExample):
            return AnnotatedExample(ex.id, ex.document_text, ex.summary_text, ex.system, ex.expert_scores,
                                    ex.aggregated_score, reference=ex.summary_text + " again")
        return UnlabeledExample(ex.id, ex.document_text, ex.summary_text, ex.system, ex.summary_text + " again")

    with pytest.raises(ValueError, match="references"):
        run_input_mode_ablation(m0, split, OPT, "max_pearson")
    split.train, split.validation, split.test = ([with_ref(e) for e in part] for part in
                                                 (split.train, split.validation, split.test))
    split.unlabeled_parts = [[with_ref(e) for e in p] for p in split.unlabeled_parts]
    ab = run_input_mode_ablation(m0, split, OPT, "max_pearson")
    assert set(ab.results) == {"document", "reference"}
    doc, ref = ab.configs["document"], ab.configs["reference"]
    assert {k for k in doc if doc[k] != ref[k]} == {"pairing"}
    for pairing, state in ab.states.items():
        assert state.audit and all(e["pairing"] == pairing for e in state.audit)
        assert len(state.rounds) == 2
    assert len(ab.raw) == 2 * len(split.test)
    lines = ab.to_csv().splitlines()
    assert lines[1].split(",")[2] == "[CLS] O [SEP] S"
    with pytest.raises(ValueError, match="summary-only"):
        run_input_mode_ablation(tiny_model("fluency"), split, OPT, "max_pearson")


def test_symmetric_arms_on_degenerate_data():
    # summary = document = reference: both pairings see identical token sequences
    rng = np.random.default_rng(0)
    records = []
    for i in range(30):
        text = f"word{i % 7} item{i % 5} thing{i % 3} ."
        ex = AnnotatedExample(f"d{i}", text, text, "s", {QualityDimension.RELEVANCE: (float(rng.integers(1, 6)),)},
                              reference=text)
        records.append(aggregate_expert_scores(ex))
    split = prepare_split(records, [], train_n=20, test_n=10, validation_n=5, k=0, seed=0)
    ab = run_input_mode_ablation(tiny_model("relevance", dim=4, buckets=64), split, OPT, "max_pearson")
    a, b = ab.results["document"], ab.results["reference"]
    assert (a.pearson, a.spearman) == (b.pearson, b.spearman)


# -- diversity scatter ---------------------------------------------------------------


def test_diversity_filter(toy):
    _, test = toy
    model = tiny_model("relevance")
    with pytest.warns(UserWarning, match="selected no examples"):
        empty = export_diversity_scatter(model, test, rouge_threshold=0.0, human_threshold=5.0)
    assert empty.records == [] and len(empty.raw) == len(test)
    full = export_diversity_scatter(model, test, rouge_threshold=1.01, human_threshold=0.0)
    assert len(full.records) == len(test)
    modes = {"document": model, "reference": model.with_pairing("reference")}
    mid = export_diversity_scatter(modes, test, rouge_threshold=0.7, human_threshold=3.5)
    again = [r["id"] for r in mid.raw if r["rouge1_f1"] < 0.7 and r["human"] > 3.5]
    assert 0 < len(again) < len(test)
    assert select_diverse(mid.raw, 0.7, 3.5) == again
    assert len(mid.records) == 2 * len(again)
    assert mid.to_csv().startswith(f"# filter: rouge1_f1 < 0.7 and human > 3.5; dimension=relevance; "
                                   f"selected={len(again)} of {len(test)}")
    with pytest.raises(ValueError, match="same dimension"):
        export_diversity_scatter({"a": model, "b": tiny_model("consistency")}, test)


# -- leaderboard ---------------------------------------------------------------------


def test_leaderboard_examples(toy):
    corpus, _ = toy
    refs = {doc_id: ref for doc_id, (_, ref) in corpus.documents.items()}
    outputs = {"oracle": dict(refs), "lead": corpus.system_outputs["lead"]}
    constant = {d: constant_model(d, 4.0) for d in DIMS}
    rows, raw = build_leaderboard(outputs, corpus.documents, constant)
    oracle = next(r for r in rows if r.system == "oracle")
    assert (oracle.rouge_1, oracle.rouge_2, oracle.rouge_l) == (1.0, 1.0, 1.0)
    for r in rows:
        assert (r.coherence, r.consistency, r.fluency, r.relevance) == (4.0, 4.0, 4.0, 4.0)
        assert r.n == len(corpus.documents) and not r.partial
    assert leaderboard_from_raw(raw, len(corpus.documents)) == rows


def test_leaderboard_partial_sorting_and_clamp(toy):
    corpus, _ = toy
    doc_ids = list(corpus.documents)
    outputs = {"full": corpus.system_outputs["lead"],
               "half": {d: corpus.system_outputs["shuffled"][d] for d in doc_ids[:3]}}
    # a head far outside the scale still reports inside [1, 5]
    wild = {d: constant_model(d, 40.0 if d == "fluency" else -7.0) for d in DIMS}
    rows, raw = build_leaderboard(outputs, corpus.documents, wild)
    half = next(r for r in rows if r.system == "half")
    assert half.partial and half.n == 3
    assert all(1.0 <= getattr(r, d) <= 5.0 for r in rows for d in DIMS)
    means = [r.mean_score for r in rows]
    assert means == sorted(means, reverse=True)
    text = leaderboard_csv(rows, digits=4).splitlines()
    assert text[0] == "system,rouge_1,rouge_2,rouge_l,coherence,consistency,fluency,relevance,n,partial"
    assert text[1 + [r.system for r in rows].index("half")].endswith(",3,1")
    with pytest.raises(ValueError, match="missing"):
        build_leaderboard(outputs, corpus.documents, {"fluency": wild["fluency"]})
    with pytest.raises(ValueError, match="unknown documents"):
        build_leaderboard({"x": {"nope": "s ."}}, corpus.documents, wild)


def test_leaderboard_row_invariants():
    with pytest.raises(ValueError, match="outside"):
        LeaderboardRow("s", 0.5, 0.5, 0.5, 0.9, 3, 3, 3, 1)
    with pytest.raises(ValueError, match="outside"):
        LeaderboardRow("s", 1.5, 0.5, 0.5, 3, 3, 3, 3, 1)


def test_leaderboard_ties_break_by_name():
    raw = []
    for system in ("zeta", "alpha"):
        for metric in ("rouge_1", "rouge_2", "rouge_l") + tuple(DIMS):
            raw.append({"system": system, "doc_id": "d0", "metric": metric, "score": 0.5 if "rouge" in metric else 3.0})
    assert [r.system for r in leaderboard_from_raw(raw, 1)] == ["alpha", "zeta"]


# -- run directories -------------------------------------------------------------------


def test_run_artifacts_are_recomputable(toy, tmp_path):
    _, test = toy
    exp = run_correlation_experiment({}, test, baselines=("rouge2",))
    out = write_run_artifacts(tmp_path / "run", fingerprint="deadbeef", config={"level": "summary"},
                              raw=exp.raw, aggregate_csv=exp.table.to_csv(), summary="grid")
    assert (out / "fingerprint.txt").read_text() == "deadbeef\n"
    assert "config fingerprint: deadbeef" in (out / "summary.txt").read_text()
    rows = list(read_jsonl(out / "raw_scores.jsonl"))
    assert table_from_raw(rows).to_csv() == (out / "aggregate.csv").read_text()
    header = next(csv.reader(io.StringIO((out / "aggregate.csv").read_text())))
    assert header[0] == "metric" and len(header) == 1 + 2 * 4
