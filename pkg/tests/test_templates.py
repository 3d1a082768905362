import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synpriming import templates as T
from synpriming.templates import STRUCTURES, StructureId


def _fill(lexicon, seed=0):
    lex, compat = lexicon
    return T.sample_slot_fill(lex, compat, np.random.default_rng(seed))


def test_structures_are_ordered_and_parse():
    assert [s.short for s in STRUCTURES] == ["UORC", "RORC", "UPRC", "RPRC", "ASRC", "CPSORC", "CASRC"]
    for i, s in enumerate(STRUCTURES):
        assert s.index == i
        assert T.StructureId.parse(s.short) is s
        assert T.StructureId.parse(s.value) is s
    with pytest.raises(ValueError):
        T.StructureId.parse("XRC")


def test_lexicon_loads_with_all_parts_of_speech(lexicon):
    lex, _ = lexicon
    counts = T.lexicon_counts(lex)
    for pos in ("noun", "verb", "adjective", "adverb", "intensifier"):
        assert counts[pos] > 0


def test_parse_lexicon_rejects_dangling_subclass():
    doc = json.loads(T.default_lexicon_path().read_text())
    doc["compatibility"]["verb_subject"]["social"] = ["nonexistent"]
    with pytest.raises(T.LexiconError):
        T.parse_lexicon(doc)


def test_parse_lexicon_rejects_empty():
    with pytest.raises(T.LexiconError):
        T.parse_lexicon({"schema": "synpriming-lexicon", "version": 1, "entries": [],
                         "compatibility": {}})


def test_orc_example_shape(lexicon):
    fill = _fill(lexicon)
    toks = T.realize_with_flags(fill, StructureId.parse("UORC"), T.NoiseFlags.off())
    assert toks[0] == "the" and toks[2] == "that" and toks[3] == "the"
    assert toks[-2:] == (".", "<eos>")
    # reduced version drops exactly the complementizer
    red = T.realize_with_flags(fill, StructureId.parse("RORC"), T.NoiseFlags.off())
    assert red == toks[:2] + toks[3:]


def test_passive_rc_agrees_with_head_number(lexicon):
    fill = _fill(lexicon, 3)
    off = T.NoiseFlags.off()
    plural = T.NoiseFlags(dict(off.plural, rc_object=True), off.adjective, off.intensifier)
    s = StructureId.parse("UPRC")
    assert "was" in T.realize_with_flags(fill, s, off)
    assert "were" in T.realize_with_flags(fill, s, plural)


def test_all_structures_share_nouns_and_modifiers(lexicon):
    # verbs may differ: subject-headed RCs need a main verb that takes the subject
    fill = _fill(lexicon, 5)
    flags = T.sample_noise_flags(fill, T.NoiseConfig(), np.random.default_rng(0))
    content = T.surface_lemmas(lexicon[0])
    bags = []
    for s in STRUCTURES:
        toks = T.realize_with_flags(fill, s, flags)
        bags.append(sorted(content[t][1] for t in toks if t in content and content[t][0] != "verb"))
    assert all(b == bags[0] for b in bags)


def test_realize_is_pure(lexicon):
    fill = _fill(lexicon, 2)
    flags = T.sample_noise_flags(fill, T.NoiseConfig(), np.random.default_rng(9))
    for s in STRUCTURES:
        assert T.realize_with_flags(fill, s, flags) == T.realize_with_flags(fill, s, flags)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_slot_fill_respects_compatibility(lexicon, seed):
    lex, compat = lexicon
    f = T.sample_slot_fill(lex, compat, np.random.default_rng(seed))
    assert f.subject.subclass in compat.verb_subject[f.rc_verb.subclass]
    assert f.rc_object.subclass in compat.verb_object[f.rc_verb.subclass]
    assert f.rc_object.subclass in compat.verb_subject[f.mc_verb.subclass]
    assert f.mc_object.subclass in compat.verb_object[f.mc_verb.subclass]


def test_sample_slot_fill_names_blocking_slot(lexicon):
    lex, compat = lexicon
    no_objects = [e for e in lex if not (e.pos == "noun" and e.subclass in ("document", "object"))]
    lone = [e for e in no_objects if e.pos != "verb" or e.subclass == "physical"]
    with pytest.raises(T.LexiconError, match="slot"):
        T.sample_slot_fill(lone, compat, np.random.default_rng(0), max_tries=20)


def test_noise_config_validates():
    with pytest.raises(ValueError):
        T.NoiseConfig(p_plural=1.5)


def test_noise_flags_round_trip(lexicon):
    fill = _fill(lexicon)
    flags = T.sample_noise_flags(fill, T.NoiseConfig(), np.random.default_rng(4))
    assert T.NoiseFlags.from_dict(json.loads(json.dumps(flags.to_dict()))).to_dict() == flags.to_dict()


def test_intensifier_requires_adjective(lexicon):
    rng = np.random.default_rng(0)
    fill = _fill(lexicon)
    for _ in range(300):
        f = T.sample_noise_flags(fill, T.NoiseConfig(p_intensifier=1.0), rng)
        for slot, on in f.intensifier.items():
            assert not on or f.adjective[slot]


def test_lists_round_trip(tmp_path, lexicon):
    lex, compat = lexicon
    lists = T.generate_lists(lex, compat, 2, T.NoiseConfig(rng_seed=3), adapt_size=4, test_size=5)
    path = tmp_path / "lists.tsv"
    T.write_lists(lists, path)
    back = T.read_lists(path)
    assert len(back) == 2
    for a, b in zip(lists, back):
        for role in ("adaptation", "test"):
            for s in STRUCTURES:
                assert [x.tokens for x in a.sentences(role)[s]] == [x.tokens for x in b.sentences(role)[s]]
                assert [x.noise_flags.to_dict() for x in a.sentences(role)[s]] == \
                       [x.noise_flags.to_dict() for x in b.sentences(role)[s]]
    T.write_lists(back, tmp_path / "again.tsv")
    assert (tmp_path / "again.tsv").read_bytes() == path.read_bytes()


def test_read_lists_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("# something else\n")
    with pytest.raises(T.SchemaError):
        T.read_lists(p)


def test_variants_share_flags(lexicon):
    lex, compat = lexicon
    (elist,) = T.generate_lists(lex, compat, 1, T.NoiseConfig(), adapt_size=3, test_size=3)
    for role in ("adaptation", "test"):
        sets = elist.sentences(role)
        for i in range(3):
            d = [sets[s][i].noise_flags.to_dict() for s in STRUCTURES]
            assert all(x == d[0] for x in d)


def test_agreement_pairs_differ_in_one_verb(lexicon, rng):
    lex, compat = lexicon
    pairs = T.agreement_pairs(lex, compat, 6, rng)
    assert {p.construction for p in pairs} == set(T.AGREEMENT_CONSTRUCTIONS)
    for p in pairs:
        diff = [i for i, (a, b) in enumerate(zip(p.grammatical, p.ungrammatical)) if a != b]
        assert len(diff) == 1 and len(p.grammatical) == len(p.ungrammatical)


def test_pairs_round_trip(tmp_path, lexicon, rng):
    lex, compat = lexicon
    pairs = T.agreement_pairs(lex, compat, 3, rng)
    T.write_pairs(pairs, tmp_path / "p.tsv")
    assert T.read_pairs(tmp_path / "p.tsv") == pairs
