"""Job runner: label resolution, skips, atomic outputs, reports."""

import json

import pytest
from nlikit.corpus import parse_conllu

from nli_annotator import JobError
from nli_annotator.job import AnnotationJob, annotate_corpus, resolve_label


def run(raw, label_map, out, **kwargs):
    inputs = sorted(p for p in raw.iterdir() if p.is_file())
    job = AnnotationJob(input_paths=inputs, label_map=label_map, output_path=out)
    return annotate_corpus(job, **kwargs)


def test_resolve_label_single_match():
    assert resolve_label("essays/ger_01.txt", {"ger_*": "GER", "ita_*": "ITA"}) == "GER"


def test_resolve_label_no_match_is_an_error():
    with pytest.raises(JobError, match="no label pattern"):
        resolve_label("x.csv", {"*.txt": "GER"})


def test_resolve_label_two_matches_is_an_error():
    with pytest.raises(JobError, match="several label patterns"):
        resolve_label("ger_01.txt", {"ger_*": "GER", "*.txt": "ITA"})


def test_three_files_two_patterns(raw_corpus, tmp_path):
    # one output document per input, labelled per its pattern
    raw, label_map = raw_corpus
    out = tmp_path / "out"
    report = run(raw, label_map, out)
    assert report.ok
    assert report.count("ok") == 3
    labels = {}
    for name in ("ger_a", "ita_b", "ita_c"):
        docs = parse_conllu((out / f"{name}.conllu").read_text(encoding="utf-8"))
        assert len(docs) == 1
        labels[name] = docs[0].label
    assert labels == {"ger_a": "GER", "ita_b": "ITA", "ita_c": "ITA"}


def test_doc_identity_comes_from_the_file(raw_corpus, tmp_path):
    raw, label_map = raw_corpus
    report = run(raw, label_map, tmp_path / "out")
    docs = parse_conllu((tmp_path / "out" / "ger_a.conllu").read_text(encoding="utf-8"))
    assert docs[0].doc_id == "ger_a"
    assert docs[0].source == "ger_a.txt"
    assert docs[0].char_length == len((raw / "ger_a.txt").read_text(encoding="utf-8"))
    assert report.model == "builtin"


def test_empty_and_undecodable_files_skipped_with_reasons(raw_corpus, tmp_path):
    raw, label_map = raw_corpus
    (raw / "ita_empty.txt").write_text("", encoding="utf-8")
    (raw / "ger_bytes.txt").write_bytes(b"\xff\xfe broken")
    out = tmp_path / "out"
    report = run(raw, label_map, out)
    assert report.ok
    assert report.count("ok") == 3
    assert report.count("skipped") == 2
    reasons = {o.input.rsplit("/", 1)[-1]: o.reason for o in report.outcomes if o.status == "skipped"}
    assert reasons == {"ita_empty.txt": "empty", "ger_bytes.txt": "not UTF-8"}
    assert not (out / "ita_empty.conllu").exists()
    assert not (out / "ger_bytes.conllu").exists()


def test_report_written_and_token_counts_match_outputs(raw_corpus, tmp_path):
    raw, label_map = raw_corpus
    out = tmp_path / "out"
    report = run(raw, label_map, out)
    on_disk = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert on_disk == report.to_dict()
    for outcome in report.outcomes:
        if outcome.status == "ok":
            docs = parse_conllu((out / outcome.output).read_text(encoding="utf-8"))
            assert docs[0].n_tokens == outcome.tokens
            assert outcome.tokens > 0


def test_no_temp_files_left_behind(raw_corpus, tmp_path):
    raw, label_map = raw_corpus
    out = tmp_path / "out"
    run(raw, label_map, out)
    assert not list(out.glob("*.tmp"))
    assert sorted(p.name for p in out.iterdir()) == [
        "ger_a.conllu", "ita_b.conllu", "ita_c.conllu", "report.json",
    ]


def test_reruns_are_byte_identical(raw_corpus, tmp_path):
    raw, label_map = raw_corpus
    first, second = tmp_path / "a", tmp_path / "b"
    run(raw, label_map, first, workers=1)
    run(raw, label_map, second, workers=3)
    for path in sorted(first.iterdir()):
        assert path.read_bytes() == (second / path.name).read_bytes()


def test_unmatched_file_fails_before_any_output(raw_corpus, tmp_path):
    raw, label_map = raw_corpus
    (raw / "stray.csv").write_text("a,b\n", encoding="utf-8")
    out = tmp_path / "out"
    with pytest.raises(JobError, match="stray.csv"):
        run(raw, label_map, out)
    assert not out.exists()


def test_output_name_collision_rejected(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "a.txt").write_text("Some text.", encoding="utf-8")
    (raw / "a.md").write_text("Other text.", encoding="utf-8")
    with pytest.raises(JobError, match="collision"):
        run(raw, {"*": "GER"}, tmp_path / "out")


def test_empty_job_rejected(tmp_path):
    job = AnnotationJob(input_paths=[], label_map={"*": "X"}, output_path=tmp_path)
    with pytest.raises(JobError, match="no input files"):
        annotate_corpus(job)


def test_bad_worker_count_rejected(raw_corpus, tmp_path):
    raw, label_map = raw_corpus
    with pytest.raises(JobError, match="workers"):
        run(raw, label_map, tmp_path / "out", workers=0)
