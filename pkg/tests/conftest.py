from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from summscore.corpus import AnnotatedExample, UnlabeledExample, aggregate_expert_scores  # noqa: E402
from summscore.dimensions import QualityDimension  # noqa: E402
from summscore.encoding import TinyTestEncoder  # noqa: E402
from summscore.regressor import RegressionHead, ScorerModel  # noqa: E402

DATA = Path(__file__).resolve().parent / "data"


def tiny_model(dimension: str = "consistency", *, dim: int = 8, buckets: int = 256, max_len: int = 128,
               seed: int = 7, head_seed: int = 0, **kwargs) -> ScorerModel:
    encoder = TinyTestEncoder(dim=dim, buckets=buckets, max_len=max_len, seed=seed)
    return ScorerModel(dimension, encoder, RegressionHead(dim, seed=head_seed), **kwargs)


def constant_model(dimension: str, b: float, **kwargs) -> ScorerModel:
    model = tiny_model(dimension, **kwargs)
    model.head.set([0.0] * model.head.dim, b)
    return model


def annotated(i: int, scores: dict[str, list[float]] | None = None, *, system: str = "sys",
              reference: str | None = "a reference summary .") -> AnnotatedExample:
    scores = scores or {d.value: [3.0, 4.0, 5.0] for d in QualityDimension}
    ex = AnnotatedExample(
        f"ex{i}",
        f"document number {i} talks about topic {i % 5} at some length .",
        f"summary {i} of topic {i % 5} .",
        system,
        {QualityDimension(k): tuple(v) for k, v in scores.items()},
        reference=reference,
    )
    return aggregate_expert_scores(ex)


def unlabeled(i: int) -> UnlabeledExample:
    return UnlabeledExample(f"u{i}", f"unlabeled document {i} .", f"unlabeled summary {i} .", "sys",
                            reference="a reference .")


@pytest.fixture
def data_dir() -> Path:
    return DATA


# one PASS/FAIL line per acceptance criterion at the end of the run
_CRITERIA: dict[int, bool] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or report.failed:
        _CRITERIA[number] = _CRITERIA.get(number, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if _CRITERIA[number] else 'FAIL'}")
