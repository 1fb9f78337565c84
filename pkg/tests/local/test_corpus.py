import json

import pytest

from forgetmari.corpus import (
    Corpus,
    SplitSpec,
    ingest_text,
    load_corpus,
    make_split,
    normalize_text,
    split_sentences,
    synthesize_corpus,
    write_corpus,
)
from forgetmari.exceptions import DomainError, EmptyText, TooFewSentences


class TestSplitSentences:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("A. B? C!", ["A.", "B?", "C!"]),
            ("No terminator", ["No terminator"]),
            ("Mr. X ran.", ["Mr.", "X ran."]),
            ("One.\nTwo.", ["One.", "Two."]),
        ],
    )
    def test_rule(self, text, expected):
        assert split_sentences(text) == expected

    @pytest.mark.parametrize("text", ["", "   \n"])
    def test_empty(self, text):
        with pytest.raises(EmptyText):
            split_sentences(text)


class TestNormalize:
    def test_strips_control_characters(self):
        assert normalize_text("a\x00b\tc\nd") == "abc\nd"

    def test_nfc(self):
        assert normalize_text("e\u0301") == "\u00e9"


class TestCorpusFiles:
    def test_write_then_load(self, tmp_path):
        corpus = Corpus(("first doc. second.", "third?"), provenance="unit")
        path = write_corpus(corpus, tmp_path / "nested" / "c.jsonl")
        loaded = load_corpus(path)
        assert loaded.documents == corpus.documents
        assert loaded.provenance == str(path)
        assert not list(tmp_path.rglob("*.partial"))

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"text": "a."}\n\n{"text": "b."}\n')
        assert load_corpus(path).sentences() == ["a.", "b."]

    def test_bad_line_reports_line_number(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"text": "a."}\n{"body": "b."}\n')
        with pytest.raises(DomainError, match=":2:"):
            load_corpus(path)

    def test_empty_corpus(self):
        with pytest.raises(EmptyText):
            Corpus(("  ", ""))

    def test_ingest(self):
        corpus = ingest_text("Hi there. Bye.", provenance="stdin")
        assert len(corpus) == 1
        assert corpus.sentences() == ["Hi there.", "Bye."]


class TestMakeSplit:
    def test_alternating(self):
        assert make_split(["s0", "s1", "s2", "s3"]) == (["s0", "s2"], ["s1", "s3"])

    def test_ratio_half(self):
        unlearn, retain = make_split(["a", "b", "c", "d"], SplitSpec("ratio", 0.5, seed=1))
        assert len(unlearn) == 2 and len(retain) == 2

    def test_ratio_ten_percent(self):
        sentences = [f"s{i}" for i in range(100)]
        unlearn, retain = make_split(sentences, SplitSpec("ratio", 0.1, seed=3))
        assert len(unlearn) == 10
        assert sorted(unlearn + retain) == sorted(sentences)

    def test_ratio_keeps_both_sides(self):
        unlearn, retain = make_split(["a", "b"], SplitSpec("ratio", 0.99))
        assert len(unlearn) == 1 and len(retain) == 1

    def test_ratio_is_seeded(self):
        sentences = [f"s{i}" for i in range(20)]
        spec = SplitSpec("ratio", 0.3, seed=9)
        assert make_split(sentences, spec) == make_split(sentences, spec)

    def test_too_few(self):
        with pytest.raises(TooFewSentences):
            make_split(["only"])

    @pytest.mark.parametrize("kwargs", [{"mode": "random"}, {"unlearn_fraction": 1.0}])
    def test_spec_domain(self, kwargs):
        with pytest.raises(DomainError):
            SplitSpec(**kwargs)


class TestSynthetic:
    def test_distinct_and_labeled(self):
        synth = synthesize_corpus(40, overlap=0.2, seed=2, n_holdout=10, n_validation=10)
        train = list(synth.train.documents)
        everything = train + list(synth.holdout.documents) + list(synth.validation.documents)
        assert len(train) == 40
        assert len(set(everything)) == len(everything)
        assert synth.families == ["unlearn", "retain"] * 20

    def test_alternating_split_separates_genres(self):
        synth = synthesize_corpus(20, overlap=0.0, seed=0)
        unlearn, retain = make_split(list(synth.train.documents))
        assert all(s.isupper() and s.endswith("!") and " " not in s for s in unlearn)
        assert all(s.islower() and s.endswith(".") for s in retain)
        assert not set("".join(unlearn)) & set("".join(retain))

    def test_shared_words_keep_retain_script(self):
        synth = synthesize_corpus(10, overlap=1.0, seed=0)
        unlearn, _ = make_split(list(synth.train.documents))
        # only the function words and punctuation stay in the unlearn script
        assert any(w in s for s in unlearn for w in ("cat", "dog", "boy", "man"))
        assert all(s.startswith(("THE_", "A_", "MY_")) for s in unlearn)

    def test_deterministic(self):
        a = synthesize_corpus(30, seed=5)
        b = synthesize_corpus(30, seed=5)
        assert a.train.documents == b.train.documents
        assert a.holdout.documents == b.holdout.documents

    def test_default_side_sets(self):
        synth = synthesize_corpus(16, seed=0)
        assert len(synth.holdout) == 8 and len(synth.validation) == 4

    @pytest.mark.parametrize("kwargs", [{"n_sentences": 1}, {"overlap": 1.5}])
    def test_rejects(self, kwargs):
        with pytest.raises((DomainError, TooFewSentences)):
            synthesize_corpus(**kwargs)


def test_corpus_lines_are_json_objects(tmp_path):
    path = write_corpus(Corpus(("x.",)), tmp_path / "c.jsonl")
    assert [json.loads(line) for line in path.read_text().splitlines()] == [{"text": "x."}]
