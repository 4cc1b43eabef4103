import json

import numpy as np
import pytest

from chunkalign.corpus import (
    ChunkUnit,
    Document,
    Granularity,
    load_corpus,
    parse_unit_id,
    read_units_tsv,
    segment,
    write_units_tsv,
)


def write_manifest(tmp_path, docs, name="manifest.jsonl"):
    manifest = tmp_path / name
    lines = []
    for doc_id, lang, text in docs:
        (tmp_path / f"{doc_id}.txt").write_text(text, encoding="utf-8")
        lines.append(json.dumps({"doc_id": doc_id, "lang": lang, "path": f"{doc_id}.txt"}))
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


class TestLoadCorpus:
    def test_loads_documents_in_manifest_order(self, tmp_path):
        manifest = write_manifest(
            tmp_path,
            [("b", "de", "eins\nzwei\ndrei\n"), ("a", "en", "one\ntwo\nthree\nfour\nfive\n")],
        )
        docs = load_corpus(manifest)
        assert [d.doc_id for d in docs] == ["b", "a"]
        assert docs[0].lang == "de"
        assert docs[0].sentences == ("eins", "zwei", "drei")
        assert len(docs[1].sentences) == 5

    def test_crlf_and_blank_lines(self, tmp_path):
        manifest = write_manifest(tmp_path, [("d", "en", "one\r\n\r\n  two  \r\nthree\r\n")])
        (doc,) = load_corpus(manifest)
        assert doc.sentences == ("one", "two", "three")

    def test_duplicate_doc_id_rejected(self, tmp_path):
        manifest = write_manifest(tmp_path, [("d", "en", "x\n")])
        line = manifest.read_text().strip()
        manifest.write_text(line + "\n" + line + "\n")
        with pytest.raises(ValueError, match="duplicate doc_id 'd'"):
            load_corpus(manifest)

    def test_missing_sentence_file_names_doc_and_path(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps({"doc_id": "gone", "lang": "en", "path": "gone.txt"}) + "\n")
        with pytest.raises(FileNotFoundError, match="'gone'.*gone.txt"):
            load_corpus(manifest)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="manifest"):
            load_corpus(tmp_path / "nope.jsonl")

    def test_blank_only_file_rejected(self, tmp_path):
        manifest = write_manifest(tmp_path, [("empty", "en", "\n\n  \n")])
        with pytest.raises(ValueError, match="'empty' is empty"):
            load_corpus(manifest)

    def test_malformed_json_line_reports_line_number(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text('{"doc_id": "a", "lang": "en", "path": "a.txt"\n')
        with pytest.raises(ValueError, match=":1: invalid JSON"):
            load_corpus(manifest)

    def test_missing_keys_rejected(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps({"doc_id": "a", "lang": "en"}) + "\n")
        with pytest.raises(ValueError, match="doc_id, lang and path"):
            load_corpus(manifest)


class TestGranularity:
    def test_from_string(self):
        assert Granularity.from_string("4").sentences == 4
        assert Granularity.from_string("doc").is_whole_document
        assert str(Granularity.from_string("DOC")) == "doc"

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            Granularity.from_string("0")
        with pytest.raises(ValueError):
            Granularity.from_string("two")
        with pytest.raises(ValueError):
            Granularity(-1)


class TestSegment:
    def doc(self, n, doc_id="d"):
        return Document(doc_id=doc_id, lang="en", sentences=tuple(f"s{i} tok" for i in range(n)))

    def test_seven_sentences_at_g2(self):
        units = segment(self.doc(7), Granularity(2))
        assert [u.sentence_count for u in units] == [2, 2, 2, 1]
        assert [u.unit_id for u in units] == ["d#0", "d#1", "d#2", "d#3"]
        assert units[0].text == "s0 tok s1 tok"
        assert units[3].text == "s6 tok"

    def test_g1_is_identity(self):
        doc = self.doc(4)
        units = segment(doc, Granularity(1))
        assert [u.text for u in units] == list(doc.sentences)
        assert all(u.sentence_count == 1 for u in units)

    def test_granularity_larger_than_doc(self):
        units = segment(self.doc(3), Granularity(8))
        assert len(units) == 1
        assert units[0].sentence_count == 3

    def test_whole_document_rejected(self):
        with pytest.raises(ValueError, match="integer granularity"):
            segment(self.doc(3), Granularity.whole_document())

    def test_token_counts(self):
        doc = Document(doc_id="d", lang="en", sentences=("a b c", "d e"))
        (unit,) = segment(doc, Granularity(2))
        assert unit.token_count == 5
        assert unit.text == "a b c d e"

    def test_reconstruction_property(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            doc = Document(
                doc_id="d",
                lang="en",
                sentences=tuple(
                    " ".join(f"w{rng.integers(100)}" for _ in range(rng.integers(1, 6)))
                    for _ in range(n)
                ),
            )
            for g in (1, 2, 3, 4, 8):
                units = segment(doc, Granularity(g))
                assert len(units) == -(-n // g)
                assert sum(u.sentence_count for u in units) == n
                assert " ".join(u.text for u in units) == " ".join(doc.sentences)
                assert [u.chunk_index for u in units] == list(range(len(units)))
                assert units == segment(doc, Granularity(g))


class TestParseUnitId:
    def test_round_trip(self):
        doc = Document(doc_id="weird#doc", lang="en", sentences=("a", "b", "c"))
        for unit in segment(doc, Granularity(2)):
            assert parse_unit_id(unit.unit_id) == (unit.doc_id, unit.chunk_index)

    @pytest.mark.parametrize("bad", ["nohash", "d#", "#3", "d#x", "d#-1", "d#1_0"])
    def test_malformed(self, bad):
        with pytest.raises(ValueError, match="malformed unit id"):
            parse_unit_id(bad)


class TestUnitsTsv:
    def test_round_trip_preserves_tabs_in_text(self, tmp_path):
        units = [
            ChunkUnit("d#0", "d", 0, "plain text", 1, 2),
            ChunkUnit("d#1", "d", 1, "text\twith tab", 1, 3),
        ]
        path = tmp_path / "units.tsv"
        write_units_tsv(units, path)
        assert read_units_tsv(path) == [("d#0", "plain text"), ("d#1", "text\twith tab")]

    def test_header_and_comments_skipped(self, tmp_path):
        path = tmp_path / "units.tsv"
        path.write_text("# unit_id\ttext\nd#0\thello\n# trailing note\n", encoding="utf-8")
        assert read_units_tsv(path) == [("d#0", "hello")]

    def test_duplicate_unit_id_rejected(self, tmp_path):
        path = tmp_path / "units.tsv"
        path.write_text("a#0\tx\na#0\ty\n")
        with pytest.raises(ValueError, match="duplicate unit id"):
            read_units_tsv(path)

    def test_missing_tab_rejected(self, tmp_path):
        path = tmp_path / "units.tsv"
        path.write_text("justtext\n")
        with pytest.raises(ValueError, match="expected unit_id"):
            read_units_tsv(path)


class TestDocument:
    def test_empty_sentences_rejected(self):
        with pytest.raises(ValueError, match="no sentences"):
            Document(doc_id="d", lang="en", sentences=())

    def test_blank_sentence_rejected(self):
        with pytest.raises(ValueError, match="blank sentence"):
            Document(doc_id="d", lang="en", sentences=("ok", "  "))
