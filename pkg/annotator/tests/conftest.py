import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # Expose each phase's report on the item so fixtures can see outcomes.
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)


@pytest.fixture
def raw_corpus(tmp_path):
    """Three text files under two label patterns, plus the pattern map."""
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "ger_a.txt").write_text(
        "My name is Anna. I come from Germany and I study in Berlin.",
        encoding="utf-8",
    )
    (raw / "ita_b.txt").write_text(
        "I like pasta very much. My city is Rome!", encoding="utf-8"
    )
    (raw / "ita_c.txt").write_text(
        "Yesterday I went to London with my friend John.", encoding="utf-8"
    )
    label_map = {"ger_*": "GER", "ita_*": "ITA"}
    return raw, label_map
