from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlikit.corpus import ROOT, AnnotatedDocument, tokenize_plain
from nlikit.errors import DataError
from nlikit.features import (
    DEFAULT_SUFFIXES,
    ENTITY_PLACEHOLDER,
    MASKED_POS,
    NGRAM_FAMILIES,
    STAT_FAMILIES,
    FeatureSpec,
    SuffixLexicon,
    all_specs,
    dependency_depths,
    dump_counts,
    encode_statistical,
    extract_features,
    extract_ngrams,
    feature_family,
    parse_spec_list,
    project_stream,
    statistical_units,
)

from conftest import quick_doc, tok


# Values fixed by the worked micro-examples, reproduced from the fixture.


def test_word_lengths_example(micro_by_id) -> None:
    assert statistical_units(micro_by_id["ex1"], "WL") == [1, 4, 5, 2, 6, 3, 2, 4]


def test_dependency_depths_example(micro_by_id) -> None:
    assert statistical_units(micro_by_id["ex2"], "DD") == [1, 0, 1, 3, 2, 3]


def test_pos_unigrams_example(micro_by_id) -> None:
    assert project_stream(micro_by_id["ex3"], "P") == ["PRP", "VBP", "RB"]
    grams = extract_ngrams(project_stream(micro_by_id["ex3"], "P"), 1, "P1")
    assert grams == {"P1:PRP": 1, "P1:VBP": 1, "P1:RB": 1}


def test_pos_masking_example(micro_by_id) -> None:
    assert project_stream(micro_by_id["ex4"], "TP") == ["Reach", "me", "at", "ADD"]


def test_morph_suffix_example(micro_by_id) -> None:
    assert project_stream(micro_by_id["ex5"], "MS") == [
        "DT",
        "NN-ction",
        "IN",
        "DT",
        "NN-ent",
        "VBZ",
        "VBG-ing",
        "RB-ly",
    ]


def test_entity_masking_example(micro_by_id) -> None:
    assert project_stream(micro_by_id["ex1"], "TN") == [
        "I", "have", "lived", "in", "ENT", "all", "my", "life",
    ]
    assert project_stream(micro_by_id["ex1"], "LN") == [
        "i", "have", "live", "in", "ENT", "all", "my", "life",
    ]


def test_sentence_lengths_include_punctuation(micro_by_id) -> None:
    assert statistical_units(micro_by_id["ex6"], "SL") == [4, 4]


def test_word_lengths_exclude_punctuation(micro_by_id) -> None:
    assert statistical_units(micro_by_id["ex6"], "WL") == [1, 4, 2, 2, 1, 4]


def test_ngrams_cross_sentence_boundaries(micro_by_id) -> None:
    doc = micro_by_id["ex6"]
    bigrams = extract_ngrams(project_stream(doc, "T"), 2, "T2")
    assert bigrams["T2:. So"] == 1
    assert sum(bigrams.values()) == doc.n_tokens - 1
    trigrams = extract_ngrams(project_stream(doc, "T"), 3, "T3")
    assert trigrams["T3:it . So"] == 1


# Family and spec mechanics.


def test_spec_parse_all_thirty() -> None:
    specs = all_specs()
    assert len(specs) == 30
    prefixes = [s.prefix for s in specs]
    assert len(set(prefixes)) == 30
    for prefix in prefixes:
        assert FeatureSpec.parse(prefix).prefix == prefix
    assert sum(1 for s in specs if s.is_statistical) == 3


@pytest.mark.parametrize("bad", ["T4", "T0", "WL2", "X1", "", "MS", "ms1", "D 1"])
def test_spec_parse_rejects_illegal(bad) -> None:
    with pytest.raises(DataError):
        FeatureSpec.parse(bad)


def test_parse_spec_list_all_and_duplicates() -> None:
    assert parse_spec_list("all") == all_specs()
    assert parse_spec_list("T1,WL") == (FeatureSpec("T", 1), FeatureSpec("WL"))
    with pytest.raises(DataError, match="duplicate"):
        parse_spec_list(["T1", "T1"])


def test_masked_pos_classes_fixed() -> None:
    assert MASKED_POS == {"ADD", "FW", "NN", "NNP", "NNPS", "NNS", "XX"}


def test_masking_preserves_stream_length(micro_docs) -> None:
    for doc in micro_docs:
        base = len(project_stream(doc, "T"))
        for family in NGRAM_FAMILIES:
            assert len(project_stream(doc, family)) == base


def test_lp_masks_lemma_stream(micro_by_id) -> None:
    assert project_stream(micro_by_id["ex4"], "LP") == ["reach", "i", "at", "ADD"]
    # NN is masked even for ordinary nouns
    assert project_stream(micro_by_id["ex5"], "TP") == [
        "the", "NN", "of", "the", "NN", "is", "heating", "quickly",
    ]


def test_feature_prefix_syntax(micro_by_id) -> None:
    counts = extract_features(micro_by_id["ex1"], all_specs()).counts
    for feat in counts:
        prefix = feat.split(":", 1)[0]
        assert prefix in {s.prefix for s in all_specs()}
        assert feature_family(feat) == prefix
    assert counts["T1:France"] == 1
    assert counts["T2:I have"] == 1
    assert counts["L1:live"] == 1
    assert counts["LN1:ENT"] == 1
    assert counts["WL:4"] == 2  # have, life
    assert counts["SL:8"] == 1
    assert counts["D1:obl"] == 2


def test_extract_features_deterministic(micro_by_id) -> None:
    a = extract_features(micro_by_id["ex5"], all_specs())
    b = extract_features(micro_by_id["ex5"], all_specs())
    assert a.counts == b.counts
    assert a.doc_id == "ex5"


def test_extract_features_requires_specs(micro_by_id) -> None:
    with pytest.raises(DataError, match="spec"):
        extract_features(micro_by_id["ex1"], ())


def test_missing_layers_raise_naming_family_and_doc() -> None:
    plain = tokenize_plain("Just plain words here.", "ENG", doc_id="plain9")
    for family in ("P", "D", "MS", "TP", "LP"):
        with pytest.raises(DataError, match=f"(?s){family}.*plain9"):
            project_stream(plain, family)
    with pytest.raises(DataError, match="plain9"):
        statistical_units(plain, "DD")
    # lemma exists in plain docs, so L works; T always works
    assert project_stream(plain, "L")[0] == "just"


def test_unknown_family_rejected(micro_by_id) -> None:
    with pytest.raises(DataError):
        project_stream(micro_by_id["ex1"], "Q")
    with pytest.raises(DataError):
        statistical_units(micro_by_id["ex1"], "T")


# Suffix lexicon behavior.


def test_suffix_lexicon_longest_match() -> None:
    lex = SuffixLexicon()
    assert lex.match("election") == "ction"
    assert lex.match("nation") == "tion"  # "ation" would leave a 1-char stem
    assert lex.match("quickly") == "ly"
    assert lex.match("is") is None
    assert lex.match("the") is None
    assert lex.match("Heating") == "ing"  # case-insensitive


def test_suffix_lexicon_stem_guard() -> None:
    lex = SuffixLexicon(("ing",))
    assert lex.match("sing") is None  # stem would be one character
    assert lex.match("swing") == "ing"


def test_suffix_lexicon_rejects_bad_entries() -> None:
    with pytest.raises(DataError):
        SuffixLexicon(())
    with pytest.raises(DataError):
        SuffixLexicon(("ing", "ing"))
    with pytest.raises(DataError):
        SuffixLexicon(("ING",))


def test_custom_lexicon_threads_through(micro_by_id) -> None:
    bare = SuffixLexicon(("zzz",))
    assert project_stream(micro_by_id["ex5"], "MS", bare) == [
        "DT", "NN", "IN", "DT", "NN", "VBZ", "VBG", "RB",
    ]


def test_default_suffixes_sane() -> None:
    assert len(DEFAULT_SUFFIXES) == len(set(DEFAULT_SUFFIXES))
    assert all(len(s) >= 2 for s in DEFAULT_SUFFIXES)


def test_ms_unit_shape(micro_docs) -> None:
    lex = SuffixLexicon()
    for doc in micro_docs:
        for unit, token in zip(
            project_stream(doc, "MS"), (t for s in doc.sentences for t in s)
        ):
            if unit == token.pos:
                continue
            assert unit.startswith(token.pos + "-")
            suffix = unit[len(token.pos) + 1 :]
            assert suffix in lex.suffixes
            assert token.surface.lower().endswith(suffix)


# Statistical encodings and depth computation.


def test_encode_statistical_keys(micro_by_id) -> None:
    wl = encode_statistical(micro_by_id["ex3"], "WL")
    assert wl == {"WL:1": 1, "WL:3": 1, "WL:4": 1}


def test_dependency_depths_hand_tree() -> None:
    # chain: a <- b <- c plus d attached to a
    sent = (
        tok("a", head=ROOT, dep="root"),
        tok("b", head=0),
        tok("c", head=1),
        tok("d", head=0),
    )
    assert dependency_depths(sent) == [0, 1, 2, 1]


def test_dump_counts_sorted() -> None:
    text = dump_counts({"T1:b": 2, "T1:a": 5})
    assert text == "T1:a\t5\nT1:b\t2\n"


# Properties over generated inputs.


@settings(max_examples=80, deadline=None)
@given(
    units=st.lists(st.sampled_from(["a", "bb", "ccc", "dd"]), max_size=30),
    order=st.integers(1, 3),
)
def test_ngram_total_count_property(units, order) -> None:
    grams = extract_ngrams(units, order, f"T{order}")
    assert sum(grams.values()) == max(0, len(units) - order + 1)
    assert all(v > 0 for v in grams.values())
    assert all(k.startswith(f"T{order}:") for k in grams)


@settings(max_examples=40, deadline=None)
@given(
    words=st.lists(
        st.text(alphabet="abcdefg", min_size=1, max_size=7), min_size=1, max_size=15
    )
)
def test_wl_matches_surface_lengths(words) -> None:
    doc = quick_doc("g1", "X", [words])
    assert statistical_units(doc, "WL") == [len(w) for w in words]
    assert statistical_units(doc, "SL") == [len(words)]
