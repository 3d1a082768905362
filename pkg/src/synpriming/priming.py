"""Adaptation grid: adapt on one structure, score the test sets of all seven.

For every (model, list, adaptation structure) cell a fresh copy of the
base model is adapted on the 20 adaptation sentences and then scores all
350 test sentences of that list.  Pre-adaptation surprisal depends only
on (model, list) and is computed once.
"""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import lm
from .templates import STRUCTURES, ExperimentList, SchemaError, StructureId

log = logging.getLogger(__name__)

RECORDS_SCHEMA = "# synpriming-records v1"
RECORD_FIELDS = ("model_id", "list_id", "adapt_structure", "test_structure", "sentence_id",
                 "surp_pre", "surp_post")


@dataclass(frozen=True)
class SurprisalRecord:
    model_id: str
    adapt_structure: StructureId
    test_structure: StructureId
    list_id: int
    sentence_id: int
    surp_pre: float
    surp_post: float

    def key(self):
        return (self.model_id, self.list_id, self.adapt_structure.index,
                self.test_structure.index, self.sentence_id)


@dataclass
class ExperimentPlan:
    models: Mapping[str, "lm.ModelSnapshot | str | Path"]
    lists: Sequence[ExperimentList]
    adapt_config: lm.AdaptConfig = field(default_factory=lm.AdaptConfig)
    output_path: str | Path | None = None
    seed: int = 0
    workers: int = 1


def cell_seed(seed: int, model_id: str, list_id: int, structure: StructureId) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, zlib.crc32(model_id.encode("utf-8")), list_id, structure.index])


def _load(model) -> lm.ModelSnapshot:
    return model if isinstance(model, lm.ModelSnapshot) else lm.load_checkpoint(model)


def _scorable(snapshot, elist: ExperimentList, model_id: str):
    """Mean pre-surprisal per test sentence, dropping those with no known token."""
    tests = [(s, sent) for s in STRUCTURES for sent in elist.test_sets[s]]
    ts = lm.surprisals(snapshot, [sent.tokens for _, sent in tests])
    kept, pre = [], []
    for (s, sent), t in zip(tests, ts):
        if np.all(t.mask):
            log.warning("model %s list %d: %s sentence %d is all <unk>; excluded",
                        model_id, elist.list_id, s.short, sent.sentence_id)
            continue
        kept.append((s, sent))
        pre.append(lm.mean_surprisal(t))
    return kept, pre


def _run_model_list(model_id, model, elist, config, seed, structures) -> list[SurprisalRecord]:
    base = _load(model)
    kept, pre = _scorable(base, elist, model_id)
    tokens = [sent.tokens for _, sent in kept]
    out = []
    for a in structures:
        rng = np.random.default_rng(cell_seed(seed, model_id, elist.list_id, a))
        adapted = lm.adapt(base, [x.tokens for x in elist.adaptation_sets[a]], config,
                           set_id=f"{elist.list_id}:{a.short}", rng=rng)
        post = [lm.mean_surprisal(t) for t in lm.surprisals(adapted, tokens)]
        out += [SurprisalRecord(model_id, a, s, elist.list_id, sent.sentence_id, p0, p1)
                for (s, sent), p0, p1 in zip(kept, pre, post)]
    return out


def _jobs(plan: ExperimentPlan, done: set | None = None):
    for model_id in sorted(plan.models):
        for elist in plan.lists:
            todo = [a for a in STRUCTURES if not done or (model_id, elist.list_id, a) not in done]
            if todo:
                yield (model_id, plan.models[model_id], elist, plan.adapt_config, plan.seed, todo)


def _execute(plan: ExperimentPlan, jobs) -> list[SurprisalRecord]:
    jobs = list(jobs)
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(plan.workers) as pool:
            parts = list(pool.map(_run_model_list, *zip(*jobs)))
    else:
        parts = [_run_model_list(*j) for j in jobs]
    return sorted((r for p in parts for r in p), key=SurprisalRecord.key)


def run_grid(plan: ExperimentPlan) -> list[SurprisalRecord]:
    """Run every cell of the plan; results are independent of ``workers``."""
    if not plan.models:
        raise ValueError("plan has no models")
    records = _execute(plan, _jobs(plan))
    if plan.output_path is not None:
        write_records(records, plan.output_path)
    return records


def resume(plan: ExperimentPlan, partial: Iterable[SurprisalRecord]) -> list[SurprisalRecord]:
    """Complete a partial run, recomputing only cells that are missing or short.

    A cell is complete when it holds one record per scorable test sentence
    of its list; anything else (e.g. the tail of an interrupted write) is
    discarded and rerun.
    """
    by_cell: dict[tuple, list] = {}
    for r in partial:
        by_cell.setdefault((r.model_id, r.list_id, r.adapt_structure), []).append(r)
    lists = {e.list_id: e for e in plan.lists}
    need: dict[tuple, int] = {}
    done, keep = set(), []
    for cell, recs in by_cell.items():
        model_id, list_id, _ = cell
        if model_id not in plan.models or list_id not in lists:
            continue
        if (model_id, list_id) not in need:
            kept, _ = _scorable(_load(plan.models[model_id]), lists[list_id], model_id)
            need[model_id, list_id] = len(kept)
        if len(recs) == need[model_id, list_id]:
            done.add(cell)
            keep += recs
    records = sorted(keep + _execute(plan, _jobs(plan, done)), key=SurprisalRecord.key)
    if plan.output_path is not None:
        write_records(records, plan.output_path)
    return records


def write_records(records: Sequence[SurprisalRecord], path: str | Path) -> None:
    lines = [RECORDS_SCHEMA, "\t".join(RECORD_FIELDS)]
    for r in sorted(records, key=SurprisalRecord.key):
        lines.append(f"{r.model_id}\t{r.list_id}\t{r.adapt_structure.value}\t{r.test_structure.value}"
                     f"\t{r.sentence_id}\t{r.surp_pre:.9g}\t{r.surp_post:.9g}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path: str | Path) -> list[SurprisalRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != RECORDS_SCHEMA:
        raise SchemaError(f"{path}: expected header {RECORDS_SCHEMA!r}")
    if len(lines) < 2 or tuple(lines[1].split("\t")) != RECORD_FIELDS:
        raise SchemaError(f"{path}: bad column header")
    out = []
    for n, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != len(RECORD_FIELDS):
            raise SchemaError(f"{path}:{n}: expected {len(RECORD_FIELDS)} fields")
        m, lid, a, t, sid, pre, post = parts
        out.append(SurprisalRecord(m, StructureId(a), StructureId(t), int(lid), int(sid),
                                   float(pre), float(post)))
    return out
