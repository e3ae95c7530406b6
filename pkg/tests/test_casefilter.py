import re

import pytest

from ttskit.casefilter import (
    CASE_REPORT_PATTERNS,
    Lexicon,
    default_lexicon,
    detect_case_report,
    extract_body,
    has_diabetes,
    lexicon_from_dict,
    match_lexicon,
)
from ttskit.errors import LexiconError, ToolkitError

GLP = default_lexicon("glp1ra")


class TestExtractBody:
    def test_between_markers(self):
        assert extract_body("==== Body\nhello\n==== Ref") == "\nhello\n"

    def test_markers_absent(self):
        with pytest.raises(ToolkitError, match="no body section"):
            extract_body("plain text")

    def test_ref_before_body(self):
        doc = "==== Ref\nxxx\n==== Body\nyyy"
        # string-scan oracle: no end marker after the first start marker
        start = doc.find("==== Body")
        assert doc.find("==== Ref", start) < 0
        with pytest.raises(ToolkitError, match="no body section"):
            extract_body(doc)

    def test_roundtrip_with_wrapping(self):
        body = "a 57-year-old man\nwith nausea"
        assert extract_body(f"header\n==== Body{body}==== Ref\nrefs") == body


class TestDetectCaseReport:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("We present a case report of a 57-year-old man", True),
            ("A 57 year old woman; this case presented with nausea", True),
            ("A review of GLP-1 pharmacology", False),
            ("case report without any age mention", False),
            ("An 80-year-old gentleman presented.", False),
            ("A 62 yearold female, case report.", True),
        ],
    )
    def test_examples(self, text, expected):
        assert detect_case_report(text) is expected

    def test_conjunction_matches_regex_oracle(self):
        patterns = [re.compile(p, re.IGNORECASE) for p in CASE_REPORT_PATTERNS]
        samples = [
            "case report of a 30-year old",
            "CASE REPORT OF A 70-YEAR-OLD",
            "a 5 year-old child case report",
            "this case presents a 45-year-old",
            "year-old mentioned alone",
            "case presentation only",
        ]
        for text in samples:
            expected = all(p.search(text) for p in patterns)
            assert detect_case_report(text) is expected, text

    def test_case_insensitive_invariance(self):
        base = "We Present A Case Report Of A 57-Year-Old Man"
        flipped = base.swapcase()
        assert detect_case_report(base) == detect_case_report(flipped) is True


class TestMatchLexicon:
    def test_drug_name_hit(self):
        result = match_lexicon("started on semaglutide 0.25 mg", GLP)
        assert result.is_candidate
        assert ("semaglutide", 11) in result.matched_terms

    def test_class_expression_hit(self):
        result = match_lexicon("GLP 1 receptor agonist therapy", GLP)
        assert result.is_candidate

    @pytest.mark.parametrize("variant", ["glp-1", "glp 1", "glp1", "GLP-1 RA"])
    def test_class_variants(self, variant):
        assert match_lexicon(f"on {variant} therapy", GLP).is_candidate

    def test_non_candidate(self):
        result = match_lexicon("metformin monotherapy", GLP)
        assert not result.is_candidate
        assert result.matched_terms == ()

    def test_offsets_index_the_matched_term(self):
        body = "Semaglutide then liraglutide; GLP-1 again"
        low = body.lower()
        for term, offset in match_lexicon(body, GLP).matched_terms:
            assert low[offset : offset + len(term)] == term

    def test_case_insensitivity(self):
        body = "Started SEMAGLUTIDE"
        assert match_lexicon(body, GLP).matched_terms == match_lexicon(body.lower(), GLP).matched_terms

    def test_overlapping_matches_all_reported(self):
        lex = Lexicon(name="x", literal_terms=("aa",))
        hits = match_lexicon("aaa", lex).matched_terms
        assert hits == (("aa", 0), ("aa", 1))


class TestLexiconValidation:
    def test_bad_pattern(self):
        with pytest.raises(LexiconError, match="bad pattern"):
            Lexicon(name="x", regex_patterns=("[unclosed",))

    def test_empty_term(self):
        with pytest.raises(LexiconError, match="empty literal"):
            Lexicon(name="x", literal_terms=("ok", ""))

    def test_duplicate_term(self):
        with pytest.raises(LexiconError, match="duplicate"):
            Lexicon(name="x", literal_terms=("a", "A"))

    def test_digest_is_stable(self):
        a = lexicon_from_dict({"name": "x", "literal_terms": ["a", "b"]})
        b = lexicon_from_dict({"name": "x", "literal_terms": ["a", "b"]})
        assert a.digest() == b.digest()

    def test_all_defaults_load(self):
        for key in ("glp1ra", "diabetes", "outcome_kidney", "outcome_cardiovascular", "outcome_respiratory"):
            lex = default_lexicon(key)
            assert lex.regex_patterns or lex.literal_terms


class TestHasDiabetes:
    @pytest.mark.parametrize(
        "diagnoses,expected",
        [
            (["Type 2 diabetes mellitus"], True),
            (["hyperglycemia on admission"], True),
            (["hypertension"], False),
            (["DM type II"], True),
            (["admission for chest pain"], False),  # 'dm' must not fire inside 'admission'
            (["HbA1c of 9.2%"], True),
            ([], False),
        ],
    )
    def test_keywords(self, diagnoses, expected):
        assert has_diabetes(diagnoses) is expected
