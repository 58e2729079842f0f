from __future__ import annotations

import json
from pathlib import Path

import pytest

from nlikit import cli
from nlikit.corpus import parse_conllu, serialize_conllu
from nlikit.vectorize import read_vocabulary, vocabulary_hash

from conftest import FIXTURES, quick_doc

MICRO = str(FIXTURES / "micro.conllu")


@pytest.fixture(scope="module")
def mini_path(tmp_path_factory, planted_mini) -> str:
    path = tmp_path_factory.mktemp("data") / "mini.conllu"
    path.write_text(serialize_conllu(planted_mini.documents), encoding="utf-8")
    return str(path)


def read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def check_manifest(out: Path, command: str) -> dict:
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == command
    assert manifest["artifacts"] == sorted(manifest["artifacts"])
    assert manifest["config_sha256"] == cli.config_hash(manifest["config"])
    for name in manifest["artifacts"]:
        assert (out / name).exists()
    return manifest


def test_usage_errors_exit_one(capsys) -> None:
    assert cli.main([]) == 1
    assert cli.main(["nosuchcommand"]) == 1
    assert cli.main(["ingest"]) == 1
    assert cli.main(["train", "--in", MICRO, "--features", "T1", "--out", "x"]) == 1
    err = capsys.readouterr().err
    assert "nlikit" in err


def test_ingest_micro(tmp_path) -> None:
    out = tmp_path / "out"
    assert cli.main(["ingest", "--in", MICRO, "--out", str(out)]) == 0
    manifest = check_manifest(out, "ingest")
    assert manifest["seed"] is None
    docs = parse_conllu((out / "dataset.conllu").read_text(encoding="utf-8"))
    assert len(docs) == 6
    summary = read_json(out / "summary.json")
    assert summary["labels"]["FRA"]["documents"] == 2
    assert summary["labels"]["FRA"]["tokens"] == 16


def test_ingest_bad_file_exit_two(tmp_path, capsys) -> None:
    bad = tmp_path / "bad.conllu"
    bad.write_text("# newdoc id = x\nnot a token line\n", encoding="utf-8")
    assert cli.main(["ingest", "--in", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "nlikit: error" in capsys.readouterr().err


def test_sample_balanced(tmp_path) -> None:
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["sample", "--in", MICRO, "--per-label", "1", "--seed", "5"]
    assert cli.main(args + ["--out", str(out1)]) == 0
    assert cli.main(args + ["--out", str(out2)]) == 0
    body1 = (out1 / "sampled.conllu").read_bytes()
    assert body1 == (out2 / "sampled.conllu").read_bytes()
    assert len(parse_conllu(body1.decode("utf-8"))) == 5
    manifest = check_manifest(out1, "sample")
    assert manifest["seed"] == 5
    assert (
        cli.main(
            [
                "sample", "--in", MICRO, "--per-label", "3",
                "--seed", "5", "--out", str(tmp_path / "c"),
            ]
        )
        == 2
    )


def test_pair_builds_binary_dataset(tmp_path) -> None:
    native_docs = [
        quick_doc(f"nat-{i}", "NAT", [["the", "water", "is", "cold"]])
        for i in range(4)
    ]
    native = tmp_path / "native.conllu"
    native.write_text(serialize_conllu(native_docs), encoding="utf-8")
    out = tmp_path / "out"
    code = cli.main(
        [
            "pair", "--non-native", MICRO, "--native", str(native),
            "--l1", "FRA", "--native-sample", "2", "--seed", "1",
            "--out", str(out),
        ]
    )
    assert code == 0
    check_manifest(out, "pair")
    docs = parse_conllu((out / "paired.conllu").read_text(encoding="utf-8"))
    labels = sorted(d.label for d in docs)
    assert labels == ["NATIVE", "NATIVE", "NONNATIVE", "NONNATIVE"]


def test_extract_counts(tmp_path) -> None:
    out = tmp_path / "out"
    code = cli.main(
        ["extract", "--in", MICRO, "--features", "T1,WL", "--out", str(out)]
    )
    assert code == 0
    check_manifest(out, "extract")
    lines = (out / "features_T1+WL.tsv").read_text(encoding="utf-8").splitlines()
    names = [l.split("\t")[0] for l in lines]
    assert names == sorted(names)
    table = dict(l.split("\t") for l in lines)
    assert table["T1:I"] == "5"
    assert table["WL:4"] == "7"


def test_vocab_artifact_round_trips(tmp_path) -> None:
    out = tmp_path / "out"
    code = cli.main(
        ["vocab", "--in", MICRO, "--features", "T1,WL", "--out", str(out)]
    )
    assert code == 0
    manifest = check_manifest(out, "vocab")
    vocab = read_vocabulary((out / "vocab.tsv").read_text(encoding="utf-8"))
    assert len(vocab) == manifest["notes"]["size"]
    assert manifest["notes"]["vocab_sha256"] == vocabulary_hash(vocab)
    assert all(f.startswith(("T1:", "WL:")) for f in vocab.features)


def test_train_explain_kwic_flow(tmp_path, mini_path) -> None:
    train_out = tmp_path / "train"
    code = cli.main(
        [
            "train", "--in", mini_path, "--features", "T1",
            "--seed", "3", "--out", str(train_out),
        ]
    )
    assert code == 0
    manifest = check_manifest(train_out, "train")
    assert manifest["notes"]["unconverged"] == 0
    training = read_json(train_out / "training.json")
    assert sorted(training["labels"]) == ["L00", "L01", "L02", "L03"]
    assert all(training["converged"].values())

    explain_out = tmp_path / "explain"
    code = cli.main(
        [
            "explain", "--model", str(train_out / "model.npz"),
            "--in", mini_path, "--top-k", "3", "--kwic", "2",
            "--out", str(explain_out),
        ]
    )
    assert code == 0
    check_manifest(explain_out, "explain")
    payload = read_json(explain_out / "explain.json")
    assert [sec["label"] for sec in payload["labels"]] == training["labels"]
    top = payload["labels"][0]["overuse"][0]["feature"]
    assert top == "T1:mkl00"
    assert payload["kwic"][top]  # concordance samples present
    text = (explain_out / "explain.txt").read_text(encoding="utf-8")
    assert "== L00 ==" in text

    kwic_out = tmp_path / "kwic"
    code = cli.main(
        [
            "kwic", "--in", mini_path, "--feature", "T1:mkl00",
            "--max-lines", "3", "--out", str(kwic_out),
        ]
    )
    assert code == 0
    manifest = check_manifest(kwic_out, "kwic")
    assert manifest["notes"]["matches"] == 3
    assert "mkl00" in (kwic_out / "kwic.txt").read_text(encoding="utf-8")


def test_kwic_stdout_mode(capsys, mini_path) -> None:
    code = cli.main(
        ["kwic", "--in", mini_path, "--feature", "T1:mkl01", "--max-lines", "2"]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "mkl01" in out
    assert len(out.strip().split("\n")) == 2


def test_train_unconverged_exit_three(tmp_path, mini_path) -> None:
    out = tmp_path / "out"
    code = cli.main(
        [
            "train", "--in", mini_path, "--features", "T1", "--seed", "3",
            "--tol", "1e-12", "--max-epochs", "1", "--out", str(out),
        ]
    )
    assert code == 3
    assert (out / "model.npz").exists()  # artifacts written regardless
    manifest = check_manifest(out, "train")
    assert manifest["notes"]["unconverged"] > 0


def test_cv_outputs_are_byte_stable(tmp_path, mini_path) -> None:
    config = {
        "dataset": mini_path,
        "features": "T1",
        "seed": 4,
        "k": 3,
    }
    config_path = tmp_path / "cv.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli.main(["cv", "--config", str(config_path), "--out", str(out1)]) == 0
    assert cli.main(["cv", "--config", str(config_path), "--out", str(out2)]) == 0
    report = read_json(out1 / "report.json")
    assert report["accuracy"] >= 0.9
    assert report["k"] == 3
    assert "wall_time" not in report
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    assert (out1 / "manifest.json").read_bytes() == (
        out2 / "manifest.json"
    ).read_bytes()
    check_manifest(out1, "cv")


def test_cv_config_validation(tmp_path, capsys) -> None:
    missing = tmp_path / "missing.json"
    assert cli.main(["cv", "--config", str(missing), "--out", "x"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dataset": "d", "features": "T1"}), encoding="utf-8")
    assert cli.main(["cv", "--config", str(bad), "--out", "x"]) == 2
    assert "seed" in capsys.readouterr().err
    no_out = tmp_path / "no_out.json"
    no_out.write_text(
        json.dumps({"dataset": "d", "features": "T1", "seed": 1}), encoding="utf-8"
    )
    assert cli.main(["cv", "--config", str(no_out)]) == 2


def test_grid_over_feature_rows(tmp_path, mini_path) -> None:
    out = tmp_path / "grid"
    rows = tmp_path / "rows.json"
    rows.write_text(json.dumps([["T1", "WL"]]), encoding="utf-8")
    code = cli.main(
        [
            "grid", "--dataset", mini_path, "--families", "T1,WL",
            "--rows", str(rows), "--k", "3", "--seed", "0",
            "--max-epochs", "20000", "--out", str(out),
        ]
    )
    assert code == 0
    check_manifest(out, "grid")
    tsv = (out / "grid.tsv").read_text(encoding="utf-8").strip().split("\n")
    assert tsv[0] == "features\tmini"
    assert [l.split("\t")[0] for l in tsv[1:]] == ["T1 WL", "T1", "WL"]
    for line in tsv[1:]:
        float(line.split("\t")[1])  # every cell ran
    payload = read_json(out / "grid.json")
    assert payload["errors"] == {}
    assert "T1\tmini" in payload["cells"]
    assert payload["marks"]["mini"]["top"][0] in ("T1", "T1 WL")


def test_grid_requires_rows(tmp_path, mini_path, capsys) -> None:
    code = cli.main(
        ["grid", "--dataset", mini_path, "--seed", "0", "--out", str(tmp_path)]
    )
    assert code == 2
    assert "grid needs" in capsys.readouterr().err


def test_stats_with_bands(tmp_path) -> None:
    docs = []
    for prof, width, label in ((3, 2, "A"), (8, 4, "A"), (15, 6, "B")):
        words = [f"w{i}" for i in range(width)]
        docs.append(quick_doc(f"p{prof}", label, [words, words], proficiency=prof))
    data = tmp_path / "banded.conllu"
    data.write_text(serialize_conllu(docs), encoding="utf-8")
    out = tmp_path / "out"
    code = cli.main(
        ["stats", "--in", str(data), "--bands", "1-5,6-12,13+", "--out", str(out)]
    )
    assert code == 0
    manifest = check_manifest(out, "stats")
    assert manifest["notes"]["dropped_documents"] == 0
    means = (out / "means.csv").read_text(encoding="utf-8").strip().split("\n")
    assert means[0] == "group,avg_wl,avg_sl,avg_dd"
    banded = (out / "means_by_band.csv").read_text(encoding="utf-8").strip().split("\n")
    assert [l.split(",")[0] for l in banded] == [
        "group", "1-5", "6-12", "13+", "(All)",
    ]
    sl = [float(l.split(",")[2]) for l in banded[1:4]]
    assert sl == sorted(sl)


def test_stats_bad_bands(tmp_path, capsys) -> None:
    out = tmp_path / "out"
    code = cli.main(["stats", "--in", MICRO, "--bands", "junk", "--out", str(out)])
    assert code == 2
    assert "bad band" in capsys.readouterr().err
