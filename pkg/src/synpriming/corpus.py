"""Training corpora: a small PCFG over the shipped lexicon, and plain text."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .templates import EOS, CompatibilityMatrix, LexiconEntry, _Index, _pick, _words

# sentence-type weights of the synthetic grammar
SENTENCE_TYPES = {
    "transitive": 0.40,
    "coordination": 0.15,
    "passive": 0.10,
    "present": 0.25,
    "intransitive_rc": 0.10,
}
RC_TYPES = ("src", "orc", "rorc", "prc", "rprc")


class PCFGCorpus:
    """Sampler for a toy English grammar with relative clauses.

    Sentences are transitive clauses, VP coordinations, full passives and
    present-tense clauses with subject-verb agreement; noun phrases take
    optional adjectives (with intensifiers) and, with probability
    ``p_rc``, one relative clause of any of five types.
    """

    def __init__(self, lexicon: Sequence[LexiconEntry], compat: CompatibilityMatrix,
                 p_rc: float = 0.25, p_plural: float = 0.4, p_adjective: float = 0.3,
                 p_intensifier: float = 0.3, p_adverb: float = 0.3):
        self.ix = _Index(lexicon)
        self.compat = compat
        self.p_rc = p_rc
        self.p_plural = p_plural
        self.p_adjective = p_adjective
        self.p_intensifier = p_intensifier
        self.p_adverb = p_adverb
        self.verbs = self.ix.by_pos["verb"]
        self.types = list(SENTENCE_TYPES)
        w = np.array([SENTENCE_TYPES[t] for t in self.types])
        self.weights = w / w.sum()

    def _noun(self, rng, subs):
        return _pick(rng, self.ix.in_subclasses("noun", subs))

    def _verb_for(self, rng, subj=None, obj=None):
        c = self.compat
        cands = [v for v in self.verbs
                 if (subj is None or subj.subclass in c.verb_subject[v.subclass])
                 and (obj is None or obj.subclass in c.verb_object[v.subclass])]
        return _pick(rng, cands) if cands else None

    def _np(self, rng, noun, plural=None, allow_rc=False):
        if plural is None:
            plural = bool(rng.random() < self.p_plural)
        out = ["the"]
        adjs = self.ix.in_subclasses("adjective", self.compat.noun_adjective.get(noun.subclass, ()))
        if adjs and rng.random() < self.p_adjective:
            ints = self.ix.by_pos["intensifier"]
            if ints and rng.random() < self.p_intensifier:
                out += _words(_pick(rng, ints).form("base"))
            out += _words(_pick(rng, adjs).form("base"))
        out += _words(noun.form("pl" if plural else "sg"))
        if allow_rc and rng.random() < self.p_rc:
            out += self._rc(rng, noun, plural)
        return out

    def _rc(self, rng, head, plural=False):
        kind = RC_TYPES[int(rng.integers(len(RC_TYPES)))]
        if kind == "src":
            v = self._verb_for(rng, subj=head)
            if v is None:
                return []
            obj = self._noun(rng, self.compat.verb_object[v.subclass])
            return ["that"] + self._adv(rng, v, _words(v.form("past")) + self._np(rng, obj))
        v = self._verb_for(rng, obj=head)
        if v is None:
            return []
        agent = self._np(rng, self._noun(rng, self.compat.verb_subject[v.subclass]))
        if kind == "orc":
            return ["that"] + agent + self._adv(rng, v, _words(v.form("past")))
        if kind == "rorc":
            return agent + self._adv(rng, v, _words(v.form("past")))
        vp = self._adv(rng, v, _words(v.form("participle")) + ["by"] + agent)
        return (["that", "were" if plural else "was"] if kind == "prc" else []) + vp

    def _adv(self, rng, verb, vp):
        advs = self.ix.in_subclasses("adverb", self.compat.verb_adverb.get(verb.subclass, ()))
        if not advs or rng.random() >= self.p_adverb:
            return vp
        a = _words(_pick(rng, advs).form("base"))
        return a + vp if rng.random() < 0.5 else vp + a

    def _clause(self, rng, verb, subj_np, form="past"):
        obj = self._noun(rng, self.compat.verb_object[verb.subclass])
        return subj_np + self._adv(rng, verb, _words(verb.form(form)) + self._np(rng, obj, allow_rc=True))

    def sentence(self, rng: np.random.Generator) -> list[str]:
        kind = self.types[int(rng.choice(len(self.types), p=self.weights))]
        v = _pick(rng, self.verbs)
        subj = self._noun(rng, self.compat.verb_subject[v.subclass])
        if kind == "transitive":
            toks = self._clause(rng, v, self._np(rng, subj, allow_rc=True))
        elif kind == "coordination":
            toks = self._clause(rng, v, self._np(rng, subj))
            v2 = self._verb_for(rng, subj=subj) or v
            obj2 = self._noun(rng, self.compat.verb_object[v2.subclass])
            toks += ["and"] + self._adv(rng, v2, _words(v2.form("past")) + self._np(rng, obj2))
        elif kind == "passive":
            obj = self._noun(rng, self.compat.verb_object[v.subclass])
            plural = bool(rng.random() < self.p_plural)
            toks = self._np(rng, obj, plural, allow_rc=True) + ["were" if plural else "was"] + self._adv(
                rng, v, _words(v.form("participle")) + ["by"] + self._np(rng, subj))
        else:
            plural = rng.random() < self.p_plural
            if kind == "intransitive_rc":
                subj_np = ["the"] + _words(subj.form("pl" if plural else "sg")) + self._rc(rng, subj, plural)
            else:
                subj_np = self._np(rng, subj, plural=plural, allow_rc=True)
            form = "pres_pl" if plural else "pres_sg"
            if form not in v.forms:
                form = "past"
            toks = self._clause(rng, v, subj_np, form=form)
        return toks + [".", EOS]

    def generate(self, n_tokens: int, seed: int = 0) -> list[str]:
        rng = np.random.default_rng(seed)
        out: list[str] = []
        while len(out) < n_tokens:
            out += self.sentence(rng)
        return out


def synthetic_corpus(lexicon, compat, n_tokens: int, seed: int = 0) -> list[str]:
    return PCFGCorpus(lexicon, compat).generate(n_tokens, seed)


_TOKEN = re.compile(r"[a-z0-9']+|[.,;:!?]")


def tokenize_line(line: str) -> list[str]:
    return _TOKEN.findall(line.lower())


def read_text_corpus(path: str | Path) -> list[str]:
    """Lowercased word/punctuation tokens; one ``<eos>`` per non-empty line."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        toks = tokenize_line(line)
        if toks:
            out += toks + [EOS]
    return out


def write_text_corpus(tokens: Sequence[str], path: str | Path) -> None:
    lines, cur = [], []
    for t in tokens:
        if t == EOS:
            lines.append(" ".join(cur))
            cur = []
        else:
            cur.append(t)
    if cur:
        lines.append(" ".join(cur))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split_sentences(tokens: Sequence[str]) -> list[list[str]]:
    """Cut a token stream after every ``<eos>``."""
    out, cur = [], []
    for t in tokens:
        cur.append(t)
        if t == EOS:
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out
