import logging

import numpy as np
import pytest

from synpriming import lm, priming, templates as T
from synpriming.templates import STRUCTURES


@pytest.fixture(scope="module")
def setup(lexicon):
    lex, compat = lexicon
    lists = T.generate_lists(lex, compat, 2, T.NoiseConfig(rng_seed=5), adapt_size=3, test_size=2)
    toks = [t for e in lists for role in ("adaptation", "test") for s in STRUCTURES
            for x in e.sentences(role)[s] for t in x.tokens]
    vocab = lm.Vocabulary.build(toks, min_count=1)
    models = {"a": lm.random_init(lm.LstmHyper(nhid=6, nlayers=1), vocab, seed=1),
              "k": lm.kgram_model(toks, lm.KGramHyper(order=2), vocab)}
    return models, lists


def test_grid_shape_and_order(setup):
    models, lists = setup
    recs = priming.run_grid(priming.ExperimentPlan(models, lists))
    assert len(recs) == 2 * 2 * 7 * 7 * 2
    assert recs == sorted(recs, key=priming.SurprisalRecord.key)
    # pre-surprisal is shared by every adaptation structure
    pre = {}
    for r in recs:
        pre.setdefault((r.model_id, r.list_id, r.test_structure, r.sentence_id), set()).add(r.surp_pre)
    assert all(len(v) == 1 for v in pre.values())


def test_workers_do_not_change_results(setup):
    models, lists = setup
    one = priming.run_grid(priming.ExperimentPlan(models, lists, workers=1))
    two = priming.run_grid(priming.ExperimentPlan(models, lists, workers=2))
    assert one == two


def test_records_round_trip(tmp_path, setup):
    models, lists = setup
    path = tmp_path / "r.tsv"
    recs = priming.run_grid(priming.ExperimentPlan(models, lists, output_path=path))
    back = priming.read_records(path)
    assert len(back) == len(recs)
    for a, b in zip(recs, back):
        assert a.key() == b.key()
        assert b.surp_pre == pytest.approx(a.surp_pre, rel=1e-8)
    priming.write_records(back, tmp_path / "again.tsv")
    assert (tmp_path / "again.tsv").read_bytes() == path.read_bytes()


def test_resume_recomputes_only_missing_cells(tmp_path, setup):
    models, lists = setup
    plan = priming.ExperimentPlan(models, lists)
    full = priming.run_grid(plan)
    # drop one whole cell and half of another
    cell = lambda r: (r.model_id, r.list_id, r.adapt_structure)  # noqa: E731
    cells = sorted({cell(r) for r in full}, key=lambda c: (c[0], c[1], c[2].index))
    gone, half = cells[3], cells[5]
    halfrecs = [r for r in full if cell(r) == half]
    partial = [r for r in full if cell(r) not in (gone, half)] + halfrecs[: len(halfrecs) // 2]
    assert priming.resume(plan, partial) == full


def test_all_unknown_sentences_are_excluded(caplog, lexicon):
    lex, compat = lexicon
    (elist,) = T.generate_lists(lex, compat, 1, T.NoiseConfig(), adapt_size=2, test_size=1)
    vocab = lm.Vocabulary(("<eos>", "<unk>", "zz"))
    # every word is unknown except the final <eos>; make a sentence that has only unknown words
    elist.test_sets[STRUCTURES[0]][0] = T.GeneratedSentence(("qq", "rr"), STRUCTURES[0], None,
                                                             T.NoiseFlags.off(), 0, 0)
    snap = lm.random_init(lm.LstmHyper(nhid=3, nlayers=1), vocab)
    with caplog.at_level(logging.WARNING):
        recs = priming.run_grid(priming.ExperimentPlan({"m": snap}, [elist]))
    assert "all <unk>" in caplog.text
    assert len(recs) == 7 * 6


def test_read_records_rejects_wrong_schema(tmp_path):
    p = tmp_path / "x.tsv"
    p.write_text("# synpriming-records v9\n")
    with pytest.raises(T.SchemaError):
        priming.read_records(p)


def test_cell_seed_depends_on_every_key():
    s = STRUCTURES[0]
    base = priming.cell_seed(0, "m", 0, s).generate_state(2).tolist()
    assert priming.cell_seed(1, "m", 0, s).generate_state(2).tolist() != base
    assert priming.cell_seed(0, "n", 0, s).generate_state(2).tolist() != base
    assert priming.cell_seed(0, "m", 1, s).generate_state(2).tolist() != base
    assert priming.cell_seed(0, "m", 0, STRUCTURES[1]).generate_state(2).tolist() != base
