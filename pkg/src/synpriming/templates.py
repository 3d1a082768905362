"""Templated generation of the seven lexically matched structures.

A single :class:`SlotFill` (subject, embedded-clause object, main-clause
object, two verbs, two optional adverbs) is realized as any of the seven
:class:`StructureId` word orders.  Optional material (plural nouns,
adjectives, intensifiers, adverb position) is drawn once per item as a
:class:`NoiseFlags` record so that the seven variants stay matched.
"""

from __future__ import annotations

import enum
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

EOS = "<eos>"
LISTS_SCHEMA = "# synpriming-lists v1"
LEXICON_SCHEMA = "synpriming-lexicon"
LEXICON_VERSION = 1

POS = ("noun", "verb", "adverb", "adjective", "intensifier", "function")
CONTENT_POS = ("noun", "verb", "adverb", "adjective")
NOUN_SLOTS = ("subject", "rc_object", "mc_object")


class LexiconError(ValueError):
    pass


class SchemaError(ValueError):
    """Artifact header missing or carrying an unsupported version."""


class StructureId(str, enum.Enum):
    UnreducedObjectRC = "UnreducedObjectRC"
    ReducedObjectRC = "ReducedObjectRC"
    UnreducedPassiveRC = "UnreducedPassiveRC"
    ReducedPassiveRC = "ReducedPassiveRC"
    ActiveSubjectRC = "ActiveSubjectRC"
    CoordPSORC = "CoordPSORC"
    CoordASRC = "CoordASRC"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @property
    def index(self) -> int:
        return STRUCTURES.index(self)

    @property
    def is_rc(self) -> bool:
        return self not in (StructureId.CoordPSORC, StructureId.CoordASRC)

    @property
    def reduced(self) -> bool | None:
        """Reduction status; None outside the object/passive RCs."""
        return _REDUCED.get(self)

    @property
    def passive(self) -> bool | None:
        return _PASSIVE.get(self)

    @classmethod
    def parse(cls, text: str) -> "StructureId":
        for s in cls:
            if text in (s.value, s.short):
                return s
        raise ValueError(f"unknown structure {text!r}")


STRUCTURES: tuple[StructureId, ...] = tuple(StructureId)
_SHORT = {
    StructureId.UnreducedObjectRC: "UORC",
    StructureId.ReducedObjectRC: "RORC",
    StructureId.UnreducedPassiveRC: "UPRC",
    StructureId.ReducedPassiveRC: "RPRC",
    StructureId.ActiveSubjectRC: "ASRC",
    StructureId.CoordPSORC: "CPSORC",
    StructureId.CoordASRC: "CASRC",
}
_REDUCED = {
    StructureId.UnreducedObjectRC: False,
    StructureId.ReducedObjectRC: True,
    StructureId.UnreducedPassiveRC: False,
    StructureId.ReducedPassiveRC: True,
}
_PASSIVE = {
    StructureId.UnreducedObjectRC: False,
    StructureId.ReducedObjectRC: False,
    StructureId.UnreducedPassiveRC: True,
    StructureId.ReducedPassiveRC: True,
}


# ---------------------------------------------------------------------------
# lexicon


@dataclass(frozen=True)
class LexiconEntry:
    lemma: str
    pos: str
    subclass: str
    forms: Mapping[str, str]

    def __hash__(self):
        return hash((self.lemma, self.pos))

    def form(self, key: str) -> str:
        try:
            return self.forms[key]
        except KeyError:
            raise LexiconError(f"{self.pos} {self.lemma!r} has no {key!r} form") from None

    @property
    def is_content(self) -> bool:
        return self.pos in CONTENT_POS


@dataclass(frozen=True)
class CompatibilityMatrix:
    verb_subject: Mapping[str, frozenset[str]]
    verb_object: Mapping[str, frozenset[str]]
    noun_adjective: Mapping[str, frozenset[str]] = field(default_factory=dict)
    verb_adverb: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            name: {k: sorted(v) for k, v in getattr(self, name).items()}
            for name in ("verb_subject", "verb_object", "noun_adjective", "verb_adverb")
        }


_REQUIRED_FORMS = {"noun": ("sg", "pl"), "verb": ("past", "participle")}
FUNCTION_WORDS = ("the", "that", "was", "were", "by", "and")


def default_lexicon_path() -> Path:
    return Path(str(resources.files("synpriming") / "data" / "lexicon.json"))


def parse_lexicon(doc: Mapping) -> tuple[list[LexiconEntry], CompatibilityMatrix]:
    """Build and validate a lexicon from its decoded JSON document."""
    if doc.get("schema", LEXICON_SCHEMA) != LEXICON_SCHEMA:
        raise LexiconError(f"not a lexicon file (schema={doc.get('schema')!r})")
    if int(doc.get("version", LEXICON_VERSION)) != LEXICON_VERSION:
        raise LexiconError(f"unsupported lexicon version {doc.get('version')}")
    raw = doc.get("entries") or []
    if not raw:
        raise LexiconError("no entries")

    entries = []
    seen = set()
    for i, r in enumerate(raw):
        try:
            e = LexiconEntry(str(r["lemma"]), str(r["pos"]), str(r.get("subclass", "")),
                             dict(r.get("forms") or {"base": r["lemma"]}))
        except (KeyError, TypeError) as exc:
            raise LexiconError(f"entry {i}: malformed ({exc})") from None
        if e.pos not in POS:
            raise LexiconError(f"entry {e.lemma!r}: unknown pos {e.pos!r}")
        if e.is_content and not e.subclass:
            raise LexiconError(f"entry {e.lemma!r}: content word without subclass")
        for key in _REQUIRED_FORMS.get(e.pos, ()):
            if not e.forms.get(key):
                raise LexiconError(f"{e.pos} {e.lemma!r} lacks the {key!r} form")
        if (e.lemma, e.pos) in seen:
            raise LexiconError(f"duplicate entry {e.pos} {e.lemma!r}")
        seen.add((e.lemma, e.pos))
        entries.append(e)

    subclasses = defaultdict(set)
    for e in entries:
        subclasses[e.pos].add(e.subclass)

    c = doc.get("compatibility") or {}
    tables = {}
    checks = {
        "verb_subject": ("verb", "noun"),
        "verb_object": ("verb", "noun"),
        "noun_adjective": ("noun", "adjective"),
        "verb_adverb": ("verb", "adverb"),
    }
    for name, (key_pos, val_pos) in checks.items():
        table = {}
        for key, values in (c.get(name) or {}).items():
            if key not in subclasses[key_pos]:
                raise LexiconError(f"{name}: dangling {key_pos} subclass {key!r}")
            for v in values:
                if v not in subclasses[val_pos]:
                    raise LexiconError(f"{name}: dangling {val_pos} subclass {v!r}")
            table[key] = frozenset(values)
        tables[name] = table
    compat = CompatibilityMatrix(**tables)

    for sub in sorted(subclasses["verb"]):
        if not compat.verb_subject.get(sub):
            raise LexiconError(f"verb subclass {sub!r} has no compatible subject subclass")
        if not compat.verb_object.get(sub):
            raise LexiconError(f"verb subclass {sub!r} has no compatible object subclass")
    return entries, compat


def load_lexicon(path: str | Path | None = None) -> tuple[list[LexiconEntry], CompatibilityMatrix]:
    path = Path(path) if path is not None else default_lexicon_path()
    try:
        doc = json.loads(path.read_text(encoding="utf-8") or "{}")
    except json.JSONDecodeError as exc:
        raise LexiconError(f"{path}: parse failure: {exc}") from None
    entries, compat = parse_lexicon(doc)
    logger.info("lexicon %s: %s", path.name, dict(lexicon_counts(entries)))
    return entries, compat


def lexicon_counts(entries: Iterable[LexiconEntry]) -> Counter:
    return Counter(e.pos for e in entries)


def surface_lemmas(entries: Iterable[LexiconEntry]) -> dict[str, tuple[str, str]]:
    """Map every surface token of a content word to its (pos, lemma)."""
    out = {}
    for e in entries:
        if not e.is_content:
            continue
        for surface in e.forms.values():
            for tok in surface.lower().split():
                out[tok] = (e.pos, e.lemma)
    return out


class _Index:
    def __init__(self, entries: Iterable[LexiconEntry]):
        self.by_pos = defaultdict(list)
        self.by_sub = defaultdict(list)
        for e in entries:
            self.by_pos[e.pos].append(e)
            self.by_sub[e.pos, e.subclass].append(e)

    def in_subclasses(self, pos, subs, used=()):
        return [e for e in self.by_pos[pos] if e.subclass in subs and e.lemma not in used]


# ---------------------------------------------------------------------------
# slot filling


@dataclass(frozen=True, eq=True)
class SlotFill:
    """Lexical material shared by all seven variants of one item.

    ``subject`` and ``rc_object`` are the agent and patient of the
    embedded verb.  Object and passive RCs (and the matched coordination)
    are headed by the patient; the active subject RC and its coordination
    control are headed by the agent and use ``asrc_mc_verb``.
    """

    subject: LexiconEntry
    rc_object: LexiconEntry
    mc_object: LexiconEntry
    rc_verb: LexiconEntry
    mc_verb: LexiconEntry
    mc_adverb: LexiconEntry | None = None
    rc_adverb: LexiconEntry | None = None
    asrc_mc_verb: LexiconEntry | None = None
    adjectives: Mapping[str, LexiconEntry | None] = field(default_factory=dict)
    intensifiers: Mapping[str, LexiconEntry | None] = field(default_factory=dict)

    __hash__ = None

    def main_verb(self, structure: StructureId) -> LexiconEntry:
        if structure in (StructureId.ActiveSubjectRC, StructureId.CoordASRC):
            return self.asrc_mc_verb or self.mc_verb
        return self.mc_verb

    def slot_lemmas(self) -> list[str]:
        slots = [self.subject, self.rc_object, self.mc_object, self.rc_verb, self.mc_verb,
                 self.mc_adverb, self.rc_adverb]
        return [e.lemma for e in slots if e is not None]

    def content_lemmas(self) -> set[str]:
        out = set(self.slot_lemmas())
        if self.asrc_mc_verb is not None:
            out.add(self.asrc_mc_verb.lemma)
        out.update(a.lemma for a in self.adjectives.values() if a is not None)
        return out


def _pick(rng: np.random.Generator, items: Sequence):
    return items[int(rng.integers(len(items)))]


class _Blocked(Exception):
    def __init__(self, slot):
        self.slot = slot


def _try_fill(ix: _Index, compat: CompatibilityMatrix, rng) -> SlotFill:
    used: set[str] = set()

    def take(slot, cands):
        if not cands:
            raise _Blocked(slot)
        e = _pick(rng, cands)
        used.add(e.lemma)
        return e

    rc_verb = take("rc_verb", ix.by_pos["verb"])
    subject = take("subject", ix.in_subclasses("noun", compat.verb_subject[rc_verb.subclass], used))
    rc_object = take("rc_object", ix.in_subclasses("noun", compat.verb_object[rc_verb.subclass], used))
    mc_verb = take("mc_verb", [v for v in ix.by_pos["verb"] if v.lemma not in used
                               and rc_object.subclass in compat.verb_subject[v.subclass]])
    mc_object = take("mc_object", ix.in_subclasses("noun", compat.verb_object[mc_verb.subclass], used))

    if subject.subclass in compat.verb_subject[mc_verb.subclass]:
        asrc_verb = mc_verb
    else:
        asrc_verb = take("asrc_mc_verb", [
            v for v in ix.by_pos["verb"] if v.lemma not in used
            and subject.subclass in compat.verb_subject[v.subclass]
            and mc_object.subclass in compat.verb_object[v.subclass]])

    adv_subs = compat.verb_adverb.get(mc_verb.subclass, frozenset()) & \
        compat.verb_adverb.get(asrc_verb.subclass, frozenset())
    cands = ix.in_subclasses("adverb", adv_subs, used)
    mc_adverb = take("mc_adverb", cands) if cands else None
    cands = ix.in_subclasses("adverb", compat.verb_adverb.get(rc_verb.subclass, ()), used)
    rc_adverb = take("rc_adverb", cands) if cands else None

    adjectives, intensifiers = {}, {}
    nouns = {"subject": subject, "rc_object": rc_object, "mc_object": mc_object}
    for slot in NOUN_SLOTS:
        cands = ix.in_subclasses("adjective", compat.noun_adjective.get(nouns[slot].subclass, ()), used)
        adjectives[slot] = take(slot + "_adjective", cands) if cands else None
        ints = ix.by_pos["intensifier"]
        intensifiers[slot] = _pick(rng, ints) if ints else None

    return SlotFill(subject, rc_object, mc_object, rc_verb, mc_verb, mc_adverb, rc_adverb,
                    asrc_verb, adjectives, intensifiers)


def sample_slot_fill(lexicon: Sequence[LexiconEntry], compat: CompatibilityMatrix,
                     rng: np.random.Generator, max_tries: int = 200) -> SlotFill:
    """Sample one item, uniformly over the valid choices at each slot.

    Slots are filled in the order rc_verb, subject, rc_object, mc_verb,
    mc_object, ASRC main verb, adverbs, adjectives; lemmas already used in
    the item are excluded.  Dead ends restart the whole draw.
    """
    ix = lexicon if isinstance(lexicon, _Index) else _Index(lexicon)
    blocked = Counter()
    for _ in range(max_tries):
        try:
            return _try_fill(ix, compat, rng)
        except _Blocked as b:
            blocked[b.slot] += 1
    slot = blocked.most_common(1)[0][0]
    raise LexiconError(f"no valid completion after {max_tries} draws; blocking slot: {slot}")


# ---------------------------------------------------------------------------
# realization


@dataclass(frozen=True)
class NoiseConfig:
    p_plural: float = 0.40
    p_adjective: float = 0.50
    p_intensifier: float = 0.40
    p_adverb_present: float = 0.50
    p_postverbal: float = 0.50
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("p_plural", "p_adjective", "p_intensifier", "p_adverb_present", "p_postverbal"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")


@dataclass(frozen=True)
class NoiseFlags:
    plural: Mapping[str, bool]
    adjective: Mapping[str, bool]
    intensifier: Mapping[str, bool]
    mc_adverb: str | None = None  # "pre" | "post" | None
    rc_adverb: str | None = None

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "plural": dict(self.plural), "adjective": dict(self.adjective),
            "intensifier": dict(self.intensifier),
            "mc_adverb": self.mc_adverb, "rc_adverb": self.rc_adverb,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseFlags":
        return cls(dict(d["plural"]), dict(d["adjective"]), dict(d["intensifier"]),
                   d.get("mc_adverb"), d.get("rc_adverb"))

    @classmethod
    def off(cls) -> "NoiseFlags":
        no = {s: False for s in NOUN_SLOTS}
        return cls(dict(no), dict(no), dict(no))


def sample_noise_flags(fill: SlotFill, noise: NoiseConfig, rng: np.random.Generator) -> NoiseFlags:
    # fixed number of draws per call keeps the stream aligned across items
    u = rng.random(3 * len(NOUN_SLOTS) + 4)
    k = len(NOUN_SLOTS)
    plural = {s: bool(u[i] < noise.p_plural) for i, s in enumerate(NOUN_SLOTS)}
    adjective = {s: bool(u[k + i] < noise.p_adjective) and fill.adjectives.get(s) is not None
                 for i, s in enumerate(NOUN_SLOTS)}
    intensifier = {s: adjective[s] and bool(u[2 * k + i] < noise.p_intensifier)
                   and fill.intensifiers.get(s) is not None
                   for i, s in enumerate(NOUN_SLOTS)}

    def adverb(present_u, post_u, entry):
        if entry is None or present_u >= noise.p_adverb_present:
            return None
        return "post" if post_u < noise.p_postverbal else "pre"

    return NoiseFlags(plural, adjective, intensifier,
                      adverb(u[3 * k], u[3 * k + 1], fill.mc_adverb),
                      adverb(u[3 * k + 2], u[3 * k + 3], fill.rc_adverb))


@dataclass(frozen=True)
class GeneratedSentence:
    tokens: tuple[str, ...]
    structure: StructureId
    fill: SlotFill | None
    noise_flags: NoiseFlags
    list_id: int = 0
    sentence_id: int = 0

    __hash__ = None

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def _words(surface: str) -> list[str]:
    return surface.lower().split()


def _noun_phrase(fill: SlotFill, slot: str, flags: NoiseFlags) -> list[str]:
    noun = getattr(fill, slot)
    out = ["the"]
    if flags.adjective.get(slot) and fill.adjectives.get(slot) is not None:
        if flags.intensifier.get(slot) and fill.intensifiers.get(slot) is not None:
            out += _words(fill.intensifiers[slot].form("base"))
        out += _words(fill.adjectives[slot].form("base"))
    out += _words(noun.form("pl" if flags.plural.get(slot) else "sg"))
    return out


def _vp(head: list[str], rest: list[str], adverb: LexiconEntry | None, where: str | None):
    if adverb is None or where is None:
        return head + rest
    adv = _words(adverb.form("base"))
    return adv + head + rest if where == "pre" else head + rest + adv


def realize_with_flags(fill: SlotFill, structure: StructureId, flags: NoiseFlags) -> tuple[str, ...]:
    """Deterministic token sequence for one item in one structure."""
    S = _noun_phrase(fill, "subject", flags)
    P = _noun_phrase(fill, "rc_object", flags)
    O = _noun_phrase(fill, "mc_object", flags)
    rv = _words(fill.rc_verb.form("past"))
    rv_pp = _words(fill.rc_verb.form("participle"))
    mv = _words(fill.main_verb(structure).form("past"))

    def rc_vp(head, rest):
        return _vp(head, rest, fill.rc_adverb, flags.rc_adverb)

    main = _vp(mv, O, fill.mc_adverb, flags.mc_adverb)

    if structure is StructureId.UnreducedObjectRC:
        toks = P + ["that"] + S + rc_vp(rv, []) + main
    elif structure is StructureId.ReducedObjectRC:
        toks = P + S + rc_vp(rv, []) + main
    elif structure is StructureId.UnreducedPassiveRC:
        aux = "were" if flags.plural.get("rc_object") else "was"
        toks = P + ["that", aux] + rc_vp(rv_pp, ["by"] + S) + main
    elif structure is StructureId.ReducedPassiveRC:
        toks = P + rc_vp(rv_pp, ["by"] + S) + main
    elif structure is StructureId.ActiveSubjectRC:
        toks = S + ["that"] + rc_vp(rv, P) + main
    elif structure is StructureId.CoordPSORC:
        toks = P + rc_vp(rv, S) + ["and"] + main
    elif structure is StructureId.CoordASRC:
        toks = S + rc_vp(rv, P) + ["and"] + main
    else:  # pragma: no cover
        raise ValueError(structure)
    return tuple(toks) + (".", EOS)


def realize(fill: SlotFill, structure: StructureId, noise: NoiseConfig,
            rng: np.random.Generator, list_id: int = 0, sentence_id: int = 0) -> GeneratedSentence:
    flags = sample_noise_flags(fill, noise, rng)
    return GeneratedSentence(realize_with_flags(fill, structure, flags), structure, fill, flags,
                             list_id, sentence_id)


# ---------------------------------------------------------------------------
# experimental lists


@dataclass
class ExperimentList:
    list_id: int
    adaptation_sets: dict[StructureId, list[GeneratedSentence]]
    test_sets: dict[StructureId, list[GeneratedSentence]]

    def sentences(self, role: str) -> dict[StructureId, list[GeneratedSentence]]:
        return self.adaptation_sets if role == "adaptation" else self.test_sets


def partition_pools(lexicon: Sequence[LexiconEntry], rng: np.random.Generator):
    """Split content lemmas of every (pos, subclass) group into two halves.

    Function words and intensifiers are shared by both pools.
    """
    groups = defaultdict(list)
    shared = []
    for e in lexicon:
        if e.is_content:
            groups[e.pos, e.subclass].append(e)
        else:
            shared.append(e)
    adapt, test = list(shared), list(shared)
    for key in sorted(groups):
        members = groups[key]
        order = rng.permutation(len(members))
        for rank, i in enumerate(order):
            (adapt if rank % 2 == 0 else test).append(members[i])
    return adapt, test


def _realize_set(fills, flags, list_id):
    return {
        s: [GeneratedSentence(realize_with_flags(f, s, fl), s, f, fl, list_id, i)
            for i, (f, fl) in enumerate(zip(fills, flags))]
        for s in STRUCTURES
    }


def generate_lists(lexicon: Sequence[LexiconEntry], compat: CompatibilityMatrix, n_lists: int,
                   noise: NoiseConfig, adapt_size: int = 20, test_size: int = 50) -> list[ExperimentList]:
    """Build ``n_lists`` lists of 7 adaptation sets and 7 test sets.

    Each list draws its own random split of the content words, so lemmas
    can recur across lists but never between the adaptation and test side
    of one list.
    """
    out = []
    for list_id in range(n_lists):
        rng = np.random.default_rng([noise.rng_seed, list_id])
        adapt_lex, test_lex = partition_pools(lexicon, rng)
        sets = []
        for pool, size, role in ((adapt_lex, adapt_size, "adaptation"), (test_lex, test_size, "test")):
            ix = _Index(pool)
            try:
                fills = [sample_slot_fill(ix, compat, rng) for _ in range(size)]
            except LexiconError as exc:
                raise LexiconError(f"lexicon too small for disjoint lists ({role} pool of list "
                                   f"{list_id}): {exc}") from None
            flags = [sample_noise_flags(f, noise, rng) for f in fills]
            sets.append(_realize_set(fills, flags, list_id))
        elist = ExperimentList(list_id, sets[0], sets[1])
        _check_disjoint(elist)
        out.append(elist)
    return out


def _check_disjoint(elist: ExperimentList) -> None:
    a = set().union(*(s.fill.content_lemmas() for v in elist.adaptation_sets.values() for s in v))
    t = set().union(*(s.fill.content_lemmas() for v in elist.test_sets.values() for s in v))
    if a & t:
        raise LexiconError(f"list {elist.list_id}: adaptation/test overlap {sorted(a & t)}")


LIST_FIELDS = ("sentence_id", "list_id", "structure", "role", "tokens", "noise_flags")


def write_lists(lists: Sequence[ExperimentList], path: str | Path) -> None:
    lines = [LISTS_SCHEMA, "\t".join(LIST_FIELDS)]
    for elist in sorted(lists, key=lambda x: x.list_id):
        for role in ("adaptation", "test"):
            for s in STRUCTURES:
                for sent in elist.sentences(role)[s]:
                    flags = json.dumps(sent.noise_flags.to_dict(), sort_keys=True, separators=(",", ":"))
                    lines.append("\t".join([str(sent.sentence_id), str(elist.list_id), s.value, role,
                                            " ".join(sent.tokens), flags]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_lists(path: str | Path) -> list[ExperimentList]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != LISTS_SCHEMA:
        raise SchemaError(f"{path}: expected header {LISTS_SCHEMA!r}")
    if len(lines) < 2 or tuple(lines[1].split("\t")) != LIST_FIELDS:
        raise SchemaError(f"{path}: bad column header")
    lists: dict[int, ExperimentList] = {}
    for n, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != len(LIST_FIELDS):
            raise SchemaError(f"{path}:{n}: expected {len(LIST_FIELDS)} fields")
        sid, lid, struct, role, toks, flags = parts
        lid = int(lid)
        elist = lists.setdefault(lid, ExperimentList(lid, {s: [] for s in STRUCTURES},
                                                     {s: [] for s in STRUCTURES}))
        s = StructureId(struct)
        sent = GeneratedSentence(tuple(toks.split()), s, None, NoiseFlags.from_dict(json.loads(flags)),
                                 lid, int(sid))
        elist.sentences(role)[s].append(sent)
    return [lists[k] for k in sorted(lists)]


# ---------------------------------------------------------------------------
# agreement minimal pairs


@dataclass(frozen=True)
class MinimalPair:
    construction: str
    grammatical: tuple[str, ...]
    ungrammatical: tuple[str, ...]


AGREEMENT_CONSTRUCTIONS = ("simple", "src", "orc", "rorc")


def agreement_pairs(lexicon: Sequence[LexiconEntry], compat: CompatibilityMatrix,
                    n_per_construction: int, rng: np.random.Generator) -> list[MinimalPair]:
    """Subject-verb agreement pairs differing only in the main verb.

    Half of the pairs in each construction have a singular head; the
    attractor noun inside the relative clause always has the other number.
    """
    ix = _Index([e for e in lexicon if e.pos != "verb" or {"pres_sg", "pres_pl"} <= set(e.forms)])
    pairs = []
    for construction in AGREEMENT_CONSTRUCTIONS:
        for i in range(n_per_construction):
            fill = sample_slot_fill(ix, compat, rng)
            plural = i % 2 == 1
            num = lambda e, pl: _words(e.form("pl" if pl else "sg"))  # noqa: E731
            if construction in ("simple", "src"):
                head, verb = fill.subject, fill.main_verb(StructureId.ActiveSubjectRC)
            else:
                head, verb = fill.rc_object, fill.mc_verb
            obj = ["the"] + num(fill.mc_object, False)
            if construction == "simple":
                prefix = ["the"] + num(head, plural)
            elif construction == "src":
                prefix = ["the"] + num(head, plural) + ["that"] + _words(fill.rc_verb.form("past")) \
                    + ["the"] + num(fill.rc_object, not plural)
            else:
                that = ["that"] if construction == "orc" else []
                prefix = ["the"] + num(head, plural) + that + ["the"] + num(fill.subject, not plural) \
                    + _words(fill.rc_verb.form("past"))
            good = verb.form("pres_pl" if plural else "pres_sg")
            bad = verb.form("pres_sg" if plural else "pres_pl")
            tail = obj + [".", EOS]
            pairs.append(MinimalPair(construction, tuple(prefix + [good] + tail),
                                     tuple(prefix + [bad] + tail)))
    return pairs


PAIRS_SCHEMA = "# synpriming-agreement v1"


def write_pairs(pairs: Sequence[MinimalPair], path: str | Path) -> None:
    lines = [PAIRS_SCHEMA, "construction\tgrammatical\tungrammatical"]
    lines += ["\t".join([p.construction, " ".join(p.grammatical), " ".join(p.ungrammatical)])
              for p in pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_pairs(path: str | Path) -> list[MinimalPair]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != PAIRS_SCHEMA:
        raise SchemaError(f"{path}: expected header {PAIRS_SCHEMA!r}")
    out = []
    for line in lines[2:]:
        c, g, u = line.split("\t")
        out.append(MinimalPair(c, tuple(g.split()), tuple(u.split())))
    return out
