from __future__ import annotations

from pathlib import Path
from random import Random

import pytest

from nlikit.corpus import (
    ROOT,
    AnnotatedDocument,
    LabeledDataset,
    TokenAnnotation,
    make_dataset,
    parse_conllu,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # Expose each phase's report on the item so fixtures can see outcomes.
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)


def tok(
    surface: str,
    lemma: str | None = None,
    pos: str = "NN",
    ne: str = "",
    head: int = 0,
    dep: str = "dep",
    punct: bool = False,
) -> TokenAnnotation:
    return TokenAnnotation(
        surface=surface,
        lemma=surface.lower() if lemma is None else lemma,
        pos=pos,
        ne_tag=ne,
        head=head,
        dep_label=dep,
        is_punct=punct,
    )


def flat_sentence(words: list[str], pos: str = "NN") -> tuple[TokenAnnotation, ...]:
    """First token is the root, the rest attach to it."""
    return tuple(
        tok(w, pos=pos, head=ROOT if i == 0 else 0, dep="root" if i == 0 else "dep")
        for i, w in enumerate(words)
    )


def quick_doc(
    doc_id: str,
    label: str,
    word_sentences: list[list[str]],
    proficiency: int | None = None,
) -> AnnotatedDocument:
    sentences = tuple(flat_sentence(ws) for ws in word_sentences)
    total = sum(len(w) for ws in word_sentences for w in ws)
    n_tok = sum(len(ws) for ws in word_sentences)
    return AnnotatedDocument(
        doc_id=doc_id,
        label=label,
        sentences=sentences,
        proficiency=proficiency,
        char_length=total + max(0, n_tok - 1),
    )


@pytest.fixture(scope="session")
def micro_docs() -> list[AnnotatedDocument]:
    return parse_conllu((FIXTURES / "micro.conllu").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def micro_by_id(micro_docs) -> dict[str, AnnotatedDocument]:
    return {d.doc_id: d for d in micro_docs}


@pytest.fixture(scope="session")
def micro_dataset(micro_docs) -> LabeledDataset:
    return make_dataset(micro_docs)


def build_planted(
    n_labels: int = 11,
    docs_per_label: int = 200,
    tokens_per_doc: int = 100,
    marker_rate: float = 0.05,
    filler_vocab: int = 400,
    seed: int = 13,
) -> LabeledDataset:
    """Synthetic corpus where each label plants a unique marker token.

    Fillers are drawn from a shared vocabulary; every token independently
    becomes the label's marker with probability marker_rate, so the marker
    is the only signal separating the labels.
    """
    rng = Random(seed)
    labels = [f"L{i:02d}" for i in range(n_labels)]
    fillers = [f"w{j:03d}" for j in range(filler_vocab)]
    docs = []
    for label in labels:
        marker = f"mk{label.lower()}"
        for d in range(docs_per_label):
            words = [
                marker if rng.random() < marker_rate else rng.choice(fillers)
                for _ in range(tokens_per_doc)
            ]
            sentences = [words[i : i + 10] for i in range(0, len(words), 10)]
            docs.append(quick_doc(f"{label}-{d:03d}", label, sentences))
    return make_dataset(docs)


@pytest.fixture(scope="session")
def planted_dataset() -> LabeledDataset:
    return build_planted()


@pytest.fixture(scope="session")
def planted_mini() -> LabeledDataset:
    return build_planted(n_labels=4, docs_per_label=30, tokens_per_doc=60, seed=29)
