"""From surprisal records to adaptation effects, matrices and distances."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from . import lm
from .priming import SurprisalRecord
from .templates import STRUCTURES, MinimalPair, StructureId

N = len(STRUCTURES)


class DegenerateFitWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------------
# raw adaptation and the surprisal regression


@dataclass
class RawAdaptation:
    """Column view of a record set; ``a = surp_pre - surp_post``."""
    model_id: np.ndarray
    list_id: np.ndarray
    adapt: np.ndarray  # structure index
    test: np.ndarray
    sentence_id: np.ndarray
    surp_pre: np.ndarray
    a: np.ndarray

    def __len__(self):
        return len(self.a)

    def subset(self, mask) -> "RawAdaptation":
        return RawAdaptation(*(getattr(self, f)[mask] for f in self.__dataclass_fields__))


def raw_adaptation(records: Sequence[SurprisalRecord]) -> RawAdaptation:
    if not records:
        raise ValueError("no records")
    return RawAdaptation(
        np.array([r.model_id for r in records]),
        np.array([r.list_id for r in records], dtype=np.int64),
        np.array([r.adapt_structure.index for r in records], dtype=np.int64),
        np.array([r.test_structure.index for r in records], dtype=np.int64),
        np.array([r.sentence_id for r in records], dtype=np.int64),
        np.array([r.surp_pre for r in records], dtype=np.float64),
        np.array([r.surp_pre - r.surp_post for r in records], dtype=np.float64),
    )


@dataclass
class RegressionFit:
    beta0: float
    beta1: float
    residuals: np.ndarray
    surp_mean: float
    se: float
    p: float

    def effects(self) -> np.ndarray:
        """Adaptation effects: intercept plus residual."""
        return self.beta0 + self.residuals


def regress_out_surprisal(a, surp_pre) -> RegressionFit:
    """OLS of ``a`` on centred pre-surprisal.

    With a centred regressor the intercept is ``mean(a)``, so the effects
    keep the mean of the raw adaptation and are orthogonal to surprisal.
    A constant regressor or fewer than three points gives ``beta1 = 0``.
    """
    a = np.asarray(a, dtype=np.float64)
    s = np.asarray(surp_pre, dtype=np.float64)
    if a.shape != s.shape or a.ndim != 1 or len(a) == 0:
        raise ValueError("a and surp_pre must be equal-length 1-d arrays")
    s_mean = float(s.mean())
    x = s - s_mean
    sxx = float(x @ x)
    beta0 = float(a.mean())
    if len(a) < 3 or sxx <= 1e-12 * max(1.0, float(s @ s)):
        warnings.warn("surprisal has no spread; adaptation effects equal raw adaptation",
                      DegenerateFitWarning, stacklevel=2)
        return RegressionFit(beta0, 0.0, a - beta0, s_mean, float("nan"), float("nan"))
    beta1 = float(x @ (a - beta0)) / sxx
    resid = a - beta0 - beta1 * x
    dof = len(a) - 2
    se = float(np.sqrt((resid @ resid) / dof / sxx))
    p = float(2 * sps.t.sf(abs(beta1 / se), dof)) if se > 0 else 0.0
    return RegressionFit(beta0, beta1, resid, s_mean, se, p)


@dataclass
class Effects:
    raw: RawAdaptation
    ae: np.ndarray
    fits: dict[str, RegressionFit]
    group_by: str

    def subset(self, mask) -> "Effects":
        return Effects(self.raw.subset(mask), self.ae[mask], self.fits, self.group_by)

    def for_model(self, model_id: str) -> "Effects":
        return self.subset(self.raw.model_id == model_id)

    @property
    def models(self) -> list[str]:
        return sorted(set(self.raw.model_id.tolist()))


def adaptation_effects(records, group_by: str = "model") -> Effects:
    """Fit the surprisal regression per model (default), per grid cell, or once."""
    raw = records if isinstance(records, RawAdaptation) else raw_adaptation(records)
    if group_by == "model":
        keys = raw.model_id.astype(str)
    elif group_by == "cell":
        keys = np.array([f"{m}|{x}|{y}" for m, x, y in zip(raw.model_id, raw.adapt, raw.test)])
    elif group_by == "all":
        keys = np.full(len(raw), "all")
    else:
        raise ValueError(f"group_by must be model, cell or all, not {group_by!r}")
    ae = np.empty(len(raw))
    fits = {}
    for k in sorted(set(keys.tolist())):
        m = keys == k
        fits[k] = regress_out_surprisal(raw.a[m], raw.surp_pre[m])
        ae[m] = fits[k].effects()
    return Effects(raw, ae, fits, group_by)


# ---------------------------------------------------------------------------
# 7x7 matrices


def _list_cells(values, model_id, list_id, adapt, test):
    """Per (model, list) 7x7 means of ``values``; NaN where empty."""
    units = sorted(set(zip(model_id.tolist(), list_id.tolist())))
    out = np.full((len(units), N, N), np.nan)
    index = {u: k for k, u in enumerate(units)}
    u = np.array([index[x] for x in zip(model_id.tolist(), list_id.tolist())])
    flat = u * N * N + adapt * N + test
    sums = np.bincount(flat, values, minlength=len(units) * N * N)
    counts = np.bincount(flat, minlength=len(units) * N * N)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (sums / counts).reshape(len(units), N, N)
    return units, out


def _hier_mean(units, per_list):
    """Mean over lists within model, then over models."""
    models = sorted({m for m, _ in units})
    per_model = np.stack([np.nanmean(per_list[[k for k, (m, _) in enumerate(units) if m == mm]], axis=0)
                          for mm in models])
    return np.nanmean(per_model, axis=0)


def cell_means(effects: Effects, values: np.ndarray | None = None) -> np.ndarray:
    """Hierarchical 7x7 mean: sentences within list, lists within model, models."""
    r = effects.raw
    v = effects.ae if values is None else values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        units, per_list = _list_cells(v, r.model_id, r.list_id, r.adapt, r.test)
        return _hier_mean(units, per_list)


@dataclass
class AdaptationMatrix:
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_models: int
    n_lists: int
    labels: tuple[str, ...] = tuple(s.short for s in STRUCTURES)

    def to_dict(self) -> dict:
        r = lambda m: [[None if np.isnan(x) else round(float(x), 9) for x in row] for row in m]
        return {"labels": list(self.labels), "mean": r(self.mean), "ci_low": r(self.lo),
                "ci_high": r(self.hi), "n_models": self.n_models, "n_lists": self.n_lists}


def adaptation_matrix(effects: Effects, n_boot: int = 1000, seed: int = 0,
                      level: float = 0.95) -> AdaptationMatrix:
    """Cell means with percentile bootstrap intervals.

    Resampling is hierarchical: models with replacement, then lists with
    replacement within each drawn model.  Intervals are widened where
    needed so they always contain the point estimate.
    """
    r = effects.raw
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        units, per_list = _list_cells(effects.ae, r.model_id, r.list_id, r.adapt, r.test)
        mean = _hier_mean(units, per_list)
        models = sorted({m for m, _ in units})
        by_model = [np.array([k for k, (m, _) in enumerate(units) if m == mm]) for mm in models]
        per_model_lists = [per_list[idx] for idx in by_model]
        rng = np.random.default_rng(seed)
        boots = np.empty((n_boot, N, N))
        for b in range(n_boot):
            picks = rng.integers(len(models), size=len(models))
            mats = []
            for p in picks:
                L = per_model_lists[p]
                mats.append(np.nanmean(L[rng.integers(len(L), size=len(L))], axis=0))
            boots[b] = np.nanmean(mats, axis=0)
        alpha = (1 - level) / 2
        lo = np.nanquantile(boots, alpha, axis=0) if n_boot else mean.copy()
        hi = np.nanquantile(boots, 1 - alpha, axis=0) if n_boot else mean.copy()
    lo, hi = np.fmin(lo, mean), np.fmax(hi, mean)
    return AdaptationMatrix(mean, lo, hi, len(models), len(set(r.list_id.tolist())))


# ---------------------------------------------------------------------------
# distance ratios


@dataclass(frozen=True)
class DistanceClass:
    """``D`` averages, over ``rows``, mean AE of in-class tests / out-class tests."""
    name: str
    rows: tuple[StructureId, ...]
    in_class: dict = field(hash=False)   # row -> tuple of test structures
    out_class: dict = field(hash=False)


_RC = tuple(s for s in STRUCTURES if s.is_rc)
_COORD = tuple(s for s in STRUCTURES if not s.is_rc)
_OBJ = (StructureId.parse("UORC"), StructureId.parse("RORC"),
        StructureId.parse("UPRC"), StructureId.parse("RPRC"))


def _classes():
    same_rc = DistanceClass("same_rc", _RC, {r: (r,) for r in _RC},
                            {r: tuple(x for x in _RC if x != r) for r in _RC})
    rc = DistanceClass("rc", _RC, {r: tuple(x for x in _RC if x != r) for r in _RC},
                       {r: _COORD for r in _RC})
    # a reduced RC against its unreduced twin vs. the other-reduction pair
    red = DistanceClass("reduction", _OBJ,
                        {r: tuple(x for x in _OBJ if x != r and x.reduced == r.reduced) for r in _OBJ},
                        {r: tuple(x for x in _OBJ if x.reduced != r.reduced) for r in _OBJ})
    return {c.name: c for c in (same_rc, rc, red)}


CLASSES: dict[str, DistanceClass] = _classes()


@dataclass
class DistanceResult:
    name: str
    d: float
    per_row: dict[str, float]


def distance_ratio(matrix: np.ndarray, cls: DistanceClass | str) -> DistanceResult:
    cls = CLASSES[cls] if isinstance(cls, str) else cls
    m = np.asarray(matrix, dtype=np.float64)
    ratios = {}
    for r in cls.rows:
        num = np.mean([m[r.index, t.index] for t in cls.in_class[r]])
        den = np.mean([m[r.index, t.index] for t in cls.out_class[r]])
        ratios[r.short] = float(num / den) if den != 0 else float("nan")
    return DistanceResult(cls.name, float(np.mean(list(ratios.values()))), ratios)


def distance_table(effects: Effects, classes=("same_rc", "reduction", "rc")) -> dict[str, dict[str, float]]:
    """``{model_id: {class: D}}`` from each model's own cell means."""
    out = {}
    for m in effects.models:
        mat = cell_means(effects.for_model(m))
        out[m] = {c: distance_ratio(mat, c).d for c in classes}
    return out


# ---------------------------------------------------------------------------
# agreement


def _diff_position(pair: MinimalPair) -> int:
    g, u = pair.grammatical, pair.ungrammatical
    if len(g) != len(u):
        raise ValueError(f"minimal pair of unequal length: {' '.join(g)!r}")
    diff = [i for i, (x, y) in enumerate(zip(g, u)) if x != y]
    if len(diff) != 1:
        raise ValueError(f"minimal pair must differ in exactly one token: {' '.join(g)!r}")
    return diff[0]


def agreement_accuracy(snapshot: lm.ModelSnapshot, pairs: Sequence[MinimalPair]) -> dict[str, float]:
    """Share of pairs where the grammatical verb is strictly less surprising.

    Compared at the single differing position; ties count as errors.
    Returns per-construction accuracy and ``overall``.
    """
    if not pairs:
        raise ValueError("no minimal pairs")
    pos = [_diff_position(p) for p in pairs]
    sents = [s for p in pairs for s in (p.grammatical, p.ungrammatical)]
    ts = lm.surprisals(snapshot, sents)
    hits: dict[str, list[bool]] = {}
    for k, (p, i) in enumerate(zip(pairs, pos)):
        g, u = ts[2 * k].values[i], ts[2 * k + 1].values[i]
        hits.setdefault(p.construction, []).append(bool(g < u))
    out = {c: float(np.mean(v)) for c, v in sorted(hits.items())}
    out["overall"] = float(np.mean([h for v in hits.values() for h in v]))
    return out


# ---------------------------------------------------------------------------
# hierarchy over structures


@dataclass
class Cluster:
    members: tuple[str, ...]
    height: float = 0.0
    children: list["Cluster"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.members[0]}
        return {"height": round(self.height, 9), "members": list(self.members),
                "children": [c.to_dict() for c in self.children]}

    def to_text(self, indent: int = 0) -> str:
        pad = "  " * indent
        if self.is_leaf:
            return f"{pad}{self.members[0]}"
        lines = [f"{pad}+ {self.height:.4f}"]
        lines += [c.to_text(indent + 1) for c in self.children]
        return "\n".join(lines)


def build_hierarchy(matrix: np.ndarray, labels: Sequence[str] | None = None,
                    tol: float = 1e-12) -> Cluster:
    """Average-linkage clustering of structures by symmetrised AE.

    Distance is ``max(sim) - sim`` with ``sim = (M + M^T) / 2``.  Ties go to
    the pair with the smallest leading indices, and a merge at the same
    height as a child's merge absorbs that child's children, so equal-height
    groups come out as one n-ary node regardless of merge order.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError("matrix must be square and non-empty")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite values")
    labels = list(labels) if labels is not None else [s.short for s in STRUCTURES][:len(m)]
    sim = (m + m.T) / 2
    dist = sim.max() - sim
    clusters = {i: (Cluster((labels[i],)), [i]) for i in range(len(m))}
    while len(clusters) > 1:
        keys = sorted(clusters, key=lambda k: min(clusters[k][1]))
        best = None
        for x in range(len(keys)):
            for y in range(x + 1, len(keys)):
                a, b = clusters[keys[x]][1], clusters[keys[y]][1]
                d = float(dist[np.ix_(a, b)].mean())
                if best is None or d < best[0] - tol:
                    best = (d, keys[x], keys[y])
        d, ka, kb = best
        ca, ia = clusters.pop(ka)
        cb, ib = clusters.pop(kb)
        kids = []
        for c in (ca, cb):
            kids += c.children if (not c.is_leaf and abs(c.height - d) <= tol) else [c]
        clusters[ka] = (Cluster(ca.members + cb.members, d, kids), ia + ib)
    return next(iter(clusters.values()))[0]
