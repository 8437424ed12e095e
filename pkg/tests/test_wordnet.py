"""Dictionary-file parsing, morphology, POS inference, and gloss extraction.

The fixture distribution (see conftest) is rendered in the real flat-file
grammar with self-consistent byte offsets, so `gloss_by_byte_seek` can serve
as an independent oracle that never goes through the parser.
"""

import pytest

from glossreader.wordnet import (GlossLookup, PosTag, WordNetFormatError,
                                 build_definition_text, infer_pos, morphy,
                                 parse_data_file, parse_exception_file,
                                 parse_index_file, split_gloss)
from conftest import gloss_by_byte_seek


class TestParseIndexFile:

    def test_header_lines_skipped(self, wordnet_dir):
        entries = parse_index_file(wordnet_dir / "index.noun")
        assert all(not e.lemma.isdigit() for e in entries)
        assert {e.lemma for e in entries} >= {"bank", "collapse", "child"}

    def test_offset_counts_match_declared(self, wordnet_dir):
        entries = {e.lemma: e for e in parse_index_file(wordnet_dir / "index.noun")}
        assert len(entries["bank"].synset_offsets) == 3
        assert len(entries["child"].synset_offsets) == 1
        assert all(isinstance(off, int) for off in entries["bank"].synset_offsets)

    def test_too_few_fields_raises_with_line(self, tmp_path):
        path = tmp_path / "index.noun"
        path.write_text("  1 header\nbank n 1\n")
        with pytest.raises(WordNetFormatError, match=r"index\.noun:2"):
            parse_index_file(path)

    def test_offset_count_mismatch_raises(self, tmp_path):
        path = tmp_path / "index.noun"
        path.write_text("bank n 2 1 @ 2 0 00001740\n")
        with pytest.raises(WordNetFormatError, match="declared 2"):
            parse_index_file(path)

    def test_non_numeric_offset_raises(self, tmp_path):
        path = tmp_path / "index.noun"
        path.write_text("bank n 1 1 @ 1 0 bogus!!!\n")
        with pytest.raises(WordNetFormatError, match="malformed"):
            parse_index_file(path)


class TestSplitGloss:

    def test_definition_and_examples(self):
        gloss, examples = split_gloss(
            'a financial institution; "he cashed a check at the bank"; '
            '"that bank holds the mortgage"')
        assert gloss == "a financial institution"
        assert examples == ["he cashed a check at the bank",
                            "that bank holds the mortgage"]

    def test_no_examples(self):
        gloss, examples = split_gloss("a long ridge or pile")
        assert gloss == "a long ridge or pile"
        assert examples == []

    def test_semicolon_without_quote_stays_in_definition(self):
        gloss, examples = split_gloss("break down; fail suddenly")
        assert gloss == "break down; fail suddenly"
        assert examples == []


class TestParseDataFile:

    def test_gloss_split_on_fixture(self, wordnet_dir):
        synsets = parse_data_file(wordnet_dir / "data.noun")
        shore = next(s for s in synsets.values() if "sloping land" in s.gloss)
        assert shore.gloss == ("sloping land (especially the slope beside a "
                               "body of water)")
        assert shore.examples == [
            "they pulled the canoe up on the bank",
            "he sat on the bank of the river and watched the currents"]

    def test_multiword_lemma_and_hex_word_count(self, wordnet_dir):
        synsets = parse_data_file(wordnet_dir / "data.noun")
        inst = next(s for s in synsets.values() if "financial institution" in s.gloss)
        assert inst.words == ["depository_financial_institution", "bank"]

    def test_offsets_key_the_map(self, wordnet_dir):
        synsets = parse_data_file(wordnet_dir / "data.verb")
        assert all(off == s.offset for off, s in synsets.items())

    def test_satellite_type_maps_to_adjective(self, wordnet_dir):
        synsets = parse_data_file(wordnet_dir / "data.adj")
        swift = next(s for s in synsets.values() if s.words == ["swift"])
        assert swift.pos is PosTag.ADJECTIVE

    def test_missing_separator_raises(self, tmp_path):
        path = tmp_path / "data.noun"
        path.write_text("00000000 09 n 01 bank 0 000 no gloss marker\n")
        with pytest.raises(WordNetFormatError, match="no '\\|'"):
            parse_data_file(path)

    def test_duplicate_offset_raises(self, tmp_path):
        path = tmp_path / "data.noun"
        line = "00000000 09 n 01 bank 0 000 | some gloss\n"
        path.write_text(line + line)
        with pytest.raises(WordNetFormatError, match="duplicate"):
            parse_data_file(path)

    def test_empty_gloss_raises(self, tmp_path):
        path = tmp_path / "data.noun"
        path.write_text("00000000 09 n 01 bank 0 000 |   \n")
        with pytest.raises(WordNetFormatError, match="empty gloss"):
            parse_data_file(path)


class TestExceptionsAndMorphy:

    def test_exception_file_parsed(self, wordnet_dir):
        exc = parse_exception_file(wordnet_dir / "verb.exc")
        assert exc["ran"] == ["run"]
        assert exc["running"] == ["run"]

    def test_single_field_line_raises(self, tmp_path):
        path = tmp_path / "verb.exc"
        path.write_text("ran\n")
        with pytest.raises(WordNetFormatError, match="base form"):
            parse_exception_file(path)

    def test_plural_detachment(self, gloss_lookup):
        index = gloss_lookup.index[PosTag.NOUN]
        exc = gloss_lookup.exceptions[PosTag.NOUN]
        assert morphy("banks", PosTag.NOUN, exc, index) == ["bank"]

    def test_exception_beats_broken_suffix_rule(self, gloss_lookup):
        # "running" minus -ing is not an indexed form; only verb.exc saves it
        index = gloss_lookup.index[PosTag.VERB]
        exc = gloss_lookup.exceptions[PosTag.VERB]
        assert morphy("running", PosTag.VERB, exc, index) == ["run"]
        assert morphy("ran", PosTag.VERB, exc, index) == ["run"]

    def test_noun_exception(self, gloss_lookup):
        index = gloss_lookup.index[PosTag.NOUN]
        exc = gloss_lookup.exceptions[PosTag.NOUN]
        assert morphy("children", PosTag.NOUN, exc, index) == ["child"]

    def test_indexed_word_returned_first(self, gloss_lookup):
        index = gloss_lookup.index[PosTag.VERB]
        exc = gloss_lookup.exceptions[PosTag.VERB]
        assert morphy("run", PosTag.VERB, exc, index)[0] == "run"

    def test_identity_when_indexed(self, gloss_lookup):
        index = gloss_lookup.index[PosTag.ADVERB]
        exc = gloss_lookup.exceptions[PosTag.ADVERB]
        assert morphy("quickly", PosTag.ADVERB, exc, index) == ["quickly"]

    def test_unknown_word_gives_empty_list(self, gloss_lookup):
        index = gloss_lookup.index[PosTag.NOUN]
        assert morphy("xylophones9", PosTag.NOUN, {}, index) == []

    def test_detached_base_must_be_indexed(self, gloss_lookup):
        # "dogs" detaches to "dog", which the fixture does not index
        index = gloss_lookup.index[PosTag.NOUN]
        assert morphy("dogs", PosTag.NOUN, {}, index) == []


class TestGlossLookup:

    def test_load_probes_dict_subdirectory(self, wordnet_dir):
        direct = GlossLookup.load(wordnet_dir)
        via_parent = GlossLookup.load(wordnet_dir.parent)
        assert direct.glosses("bank", PosTag.NOUN) == \
            via_parent.glosses("bank", PosTag.NOUN)

    def test_missing_files_raise(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            GlossLookup.load(tmp_path)

    def test_glosses_in_sense_order_match_byte_seek_oracle(self, gloss_lookup,
                                                           wordnet_dir):
        for pos in PosTag:
            data_path = wordnet_dir / f"data.{pos.file_suffix}"
            for lemma, entry in gloss_lookup.index[pos].items():
                parsed = gloss_lookup.glosses(lemma, pos)
                oracle = [gloss_by_byte_seek(data_path, off)
                          for off in entry.synset_offsets]
                assert parsed == oracle, (lemma, pos)

    def test_round_trip_lemma_in_synset_words(self, gloss_lookup):
        checked = 0
        for pos in PosTag:
            for lemma, entry in gloss_lookup.index[pos].items():
                for offset in entry.synset_offsets:
                    synset = gloss_lookup.synsets[pos][offset]
                    words = [w.lower() for w in synset.words]
                    assert lemma.lower() in words, (lemma, offset)
                    checked += 1
        assert checked >= 20

    def test_two_loads_identical(self, wordnet_dir):
        a = GlossLookup.load(wordnet_dir)
        b = GlossLookup.load(wordnet_dir)
        for pos in PosTag:
            assert {l: e.synset_offsets for l, e in a.index[pos].items()} == \
                {l: e.synset_offsets for l, e in b.index[pos].items()}
            assert {off: (s.words, s.gloss, s.examples)
                    for off, s in a.synsets[pos].items()} == \
                {off: (s.words, s.gloss, s.examples)
                 for off, s in b.synsets[pos].items()}

    def test_inflected_form_reaches_base_glosses(self, gloss_lookup):
        assert gloss_lookup.glosses_for_form("banks", PosTag.NOUN) == \
            gloss_lookup.glosses("bank", PosTag.NOUN)

    def test_sense_counts(self, gloss_lookup):
        assert gloss_lookup.sense_count("bank", PosTag.NOUN) == 3
        assert gloss_lookup.sense_count("bank", PosTag.VERB) == 1
        assert gloss_lookup.sense_count("bank", PosTag.ADVERB) == 0

    def test_uppercase_and_spaces_normalized(self, gloss_lookup):
        multi = gloss_lookup.glosses_for_form(
            "Depository Financial Institution", PosTag.NOUN)
        assert multi == gloss_lookup.glosses(
            "depository_financial_institution", PosTag.NOUN)


class TestInferPos:

    def test_determiner_before_candidate(self, gloss_lookup):
        tag = infer_pos("collapse", ["the", "collapse", "of"], 1, gloss_lookup)
        assert tag is PosTag.NOUN

    def test_determiner_with_one_modifier_between(self, gloss_lookup):
        # "run" has more verb senses than noun senses in the fixture, so the
        # noun outcome can only come from the determiner rule
        tokens = ["after", "the", "quick", "run", "home"]
        assert infer_pos("run", tokens, 3, gloss_lookup) is PosTag.NOUN

    def test_to_forces_verb(self, gloss_lookup):
        assert infer_pos("collapse", ["about", "to", "collapse"], 2,
                         gloss_lookup) is PosTag.VERB

    def test_auxiliary_forces_verb(self, gloss_lookup):
        assert infer_pos("run", ["she", "will", "run"], 2,
                         gloss_lookup) is PosTag.VERB

    def test_ly_with_adverb_senses(self, gloss_lookup):
        assert infer_pos("quickly", ["works", "quickly"], 1,
                         gloss_lookup) is PosTag.ADVERB

    def test_ly_without_adverb_senses_falls_through(self, gloss_lookup):
        assert infer_pos("mostly", ["works", "mostly"], 1,
                         gloss_lookup) is PosTag.NOUN

    def test_most_senses_wins_without_cue(self, gloss_lookup):
        # fixture: bank has 3 noun senses vs 1 verb sense
        assert infer_pos("bank", ["bank"], 0, gloss_lookup) is PosTag.NOUN
        # fixture: run has 2 verb senses vs 1 noun sense
        assert infer_pos("run", ["run"], 0, gloss_lookup) is PosTag.VERB

    def test_tie_breaks_by_fixed_priority(self, gloss_lookup):
        # collapse: 1 noun sense, 1 verb sense
        assert infer_pos("collapse", ["collapse"], 0, gloss_lookup) is PosTag.NOUN

    def test_satellite_senses_count_as_adjective(self, gloss_lookup):
        assert infer_pos("swift", ["swift"], 0, gloss_lookup) is PosTag.ADJECTIVE

    def test_total_on_unknown_word(self, gloss_lookup):
        assert infer_pos("zzzz", ["zzzz"], 0, gloss_lookup) is PosTag.NOUN

    def test_position_mismatch_raises(self, gloss_lookup):
        with pytest.raises(ValueError):
            infer_pos("bank", ["the", "river"], 1, gloss_lookup)


class TestBuildDefinitionText:

    def test_no_senses_gives_empty_string(self, gloss_lookup):
        assert build_definition_text("zzzz", PosTag.NOUN, gloss_lookup) == ""

    def test_single_gloss_exact(self, gloss_lookup, wordnet_dir):
        entry = gloss_lookup.index[PosTag.NOUN]["bank"]
        oracle = gloss_by_byte_seek(wordnet_dir / "data.noun",
                                    entry.synset_offsets[0])
        assert build_definition_text("bank", PosTag.NOUN, gloss_lookup,
                                     max_glosses=1) == oracle

    def test_two_glosses_joined(self, gloss_lookup):
        g = gloss_lookup.glosses("bank", PosTag.NOUN)
        text = build_definition_text("bank", PosTag.NOUN, gloss_lookup,
                                     max_glosses=2)
        assert text == f"{g[0]}; {g[1]}"

    def test_budget_truncates_to_token_count(self, gloss_lookup):
        from glossreader.data import tokenize

        text = build_definition_text("bank", PosTag.NOUN, gloss_lookup,
                                     max_glosses=3, budget=5)
        assert len(tokenize(text)) == 5

    def test_inflected_candidate(self, gloss_lookup):
        assert build_definition_text("banks", PosTag.NOUN, gloss_lookup) == \
            build_definition_text("bank", PosTag.NOUN, gloss_lookup)

    def test_zero_max_glosses_rejected(self, gloss_lookup):
        with pytest.raises(ValueError):
            build_definition_text("bank", PosTag.NOUN, gloss_lookup,
                                  max_glosses=0)


class TestPosTag:

    def test_satellite_key_merges_into_adjective(self):
        assert PosTag.from_key("s") is PosTag.ADJECTIVE

    def test_unknown_key_raises(self):
        with pytest.raises(WordNetFormatError):
            PosTag.from_key("x")

    def test_file_suffixes(self):
        assert [p.file_suffix for p in PosTag] == ["noun", "verb", "adj", "adv"]
