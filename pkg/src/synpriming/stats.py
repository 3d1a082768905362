"""Contrast tests on adaptation effects.

Every contrast is an OLS regression of AE on a coded predictor plus
list and corpus-list dummies.  Standard errors are HC1; p-values come
from Freedman-Lane permutation of reduced-model residuals within
(corpus list, list) strata, with ``p = (1 + #{|t*| >= |t|}) / (1 + N)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .metrics import CLASSES, Effects, distance_table
from .templates import STRUCTURES, StructureId

S = {s.short: s for s in STRUCTURES}
RC = [s for s in STRUCTURES if s.is_rc]
COORD = [s for s in STRUCTURES if not s.is_rc]


# ---------------------------------------------------------------------------
# OLS core


def _design(x: np.ndarray, nuisance: np.ndarray | None) -> np.ndarray:
    cols = [np.ones((len(x), 1)), x.reshape(len(x), -1)]
    if nuisance is not None and nuisance.size:
        cols.append(nuisance)
    return np.hstack(cols)


def dummies(labels: Sequence) -> np.ndarray:
    """Treatment-coded indicator columns, first level dropped."""
    labels = np.asarray(labels)
    levels = sorted(set(labels.tolist()))
    if len(levels) < 2:
        return np.zeros((len(labels), 0))
    return np.stack([(labels == lv).astype(np.float64) for lv in levels[1:]], axis=1)


def _drop_collinear(m: np.ndarray, keep: int) -> np.ndarray:
    """Drop columns after the first ``keep`` that add no rank."""
    cols = list(range(keep))
    for j in range(keep, m.shape[1]):
        if np.linalg.matrix_rank(m[:, cols + [j]]) == len(cols) + 1:
            cols.append(j)
    return m[:, cols]


@dataclass
class OlsFit:
    beta: np.ndarray
    se: np.ndarray  # HC1
    t: np.ndarray
    dof: int


def ols_hc1(y: np.ndarray, X: np.ndarray) -> OlsFit:
    n, k = X.shape
    if n <= k:
        raise ValueError(f"{n} observations for {k} parameters")
    xtx_inv = np.linalg.pinv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    e = y - X @ beta
    meat = (X * (e ** 2)[:, None]).T @ X
    cov = xtx_inv @ meat @ xtx_inv * n / (n - k)
    se = np.sqrt(np.maximum(np.diag(cov), 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, 0.0)
    return OlsFit(beta, se, t, n - k)


def _perm_t(y, X, cols, strata, n_perm, rng, chunk=256):
    """Freedman-Lane permutation distribution of HC1 t for columns ``cols``."""
    n, k = X.shape
    reduced = np.delete(X, cols, axis=1)
    red_beta, *_ = np.linalg.lstsq(reduced, y, rcond=None)
    fitted = reduced @ red_beta
    resid = y - fitted
    xtx_inv = np.linalg.pinv(X.T @ X)
    A = xtx_inv @ X.T  # beta = A y
    groups = [np.flatnonzero(strata == g) for g in np.unique(strata)]
    out = np.empty((n_perm, len(cols)))
    for start in range(0, n_perm, chunk):
        m = min(chunk, n_perm - start)
        Y = np.empty((n, m))
        for j in range(m):
            r = resid.copy()
            for g in groups:
                r[g] = resid[rng.permutation(g)]
            Y[:, j] = fitted + r
        B = A @ Y
        E = Y - X @ B
        for c_i, c in enumerate(cols):
            var = (A[c] ** 2) @ (E ** 2) * n / (n - k)
            se = np.sqrt(np.maximum(var, 0))
            with np.errstate(divide="ignore", invalid="ignore"):
                out[start:start + m, c_i] = np.where(se > 0, B[c] / se, 0.0)
    return out


def perm_pvalue(t_obs: float, t_null: np.ndarray) -> float:
    return (1 + int(np.sum(np.abs(t_null) >= abs(t_obs) - 1e-12))) / (1 + len(t_null))


def p_label(p: float, n_perm: int) -> str:
    if not np.isfinite(p):
        return "p=NA"
    floor = 1.0 / (1 + n_perm) if n_perm else 0.0
    if n_perm and p <= floor + 1e-15:
        # smallest attainable p, rounded up to one significant digit
        e = math.floor(math.log10(floor))
        d = math.ceil(round(floor / 10 ** e, 9))
        if d == 10:
            d, e = 1, e + 1
        return f"p<{d}e{e:03d}"
    return f"p={p:.4g}"


# ---------------------------------------------------------------------------
# contrasts


@dataclass(frozen=True)
class ContrastSpec:
    """Select observations and code them.

    ``code(adapt, test)`` returns +1, -1 (two-level) or a level name
    (multi-level), or ``None`` to exclude the observation.
    """
    name: str
    code: Callable[[StructureId, StructureId], object]
    description: str = ""
    baseline: str | None = None  # multi-level only


@dataclass
class TestResult:
    name: str
    condition: str
    term: str
    estimate: float
    se: float
    t: float
    p: float
    n: int
    n_perm: int
    mean_pos: float = float("nan")
    mean_neg: float = float("nan")

    @property
    def label(self) -> str:
        return p_label(self.p, self.n_perm)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_label"] = self.label
        return {k: (round(v, 9) if isinstance(v, float) and np.isfinite(v) else
                    (None if isinstance(v, float) else v)) for k, v in d.items()}


def _coded(effects: Effects, spec: ContrastSpec):
    r = effects.raw
    lut = {(a.index, t.index): spec.code(a, t) for a in STRUCTURES for t in STRUCTURES}
    codes = [lut[a, t] for a, t in zip(r.adapt.tolist(), r.test.tolist())]
    keep = np.array([c is not None for c in codes])
    return keep, [c for c in codes if c is not None]


def _nuisance(sub: Effects):
    r = sub.raw
    strata = np.array([f"{m}|{lid}" for m, lid in zip(r.model_id, r.list_id)])
    return np.hstack([dummies(r.list_id), dummies(r.model_id)]), strata


def fit_contrast(effects: Effects, spec: ContrastSpec, n_perm: int = 10000, seed: int = 0,
                 condition: str = "all", nuisance: bool = True) -> TestResult:
    """Two-level contrast coded +1/-1; the slope is half the difference of means."""
    keep, codes = _coded(effects, spec)
    if not keep.any():
        raise ValueError(f"{spec.name}: no observations selected")
    sub = effects.subset(keep)
    x = np.asarray(codes, dtype=np.float64)
    if set(x.tolist()) - {1.0, -1.0} or len(set(x.tolist())) < 2:
        raise ValueError(f"{spec.name}: two-level contrast needs both +1 and -1")
    nuis, strata = _nuisance(sub) if nuisance else (None, np.zeros(len(x)))
    X = _drop_collinear(_design(x, nuis), 2)
    y = sub.ae
    fit = ols_hc1(y, X)
    p = float("nan")
    if n_perm:
        null = _perm_t(y, X, [1], strata, n_perm, np.random.default_rng(seed))[:, 0]
        p = perm_pvalue(fit.t[1], null)
    return TestResult(spec.name, condition, "contrast", float(fit.beta[1]), float(fit.se[1]),
                      float(fit.t[1]), p, len(y), n_perm,
                      float(y[x > 0].mean()), float(y[x < 0].mean()))


def fit_contrasts(effects: Effects, spec: ContrastSpec, n_perm: int = 10000, seed: int = 0,
                  condition: str = "all") -> list[TestResult]:
    """Multi-level contrast, treatment coded against ``spec.baseline``."""
    keep, codes = _coded(effects, spec)
    levels = sorted(set(codes))
    if spec.baseline not in levels or len(levels) < 2:
        raise ValueError(f"{spec.name}: baseline {spec.baseline!r} missing or a single level")
    others = [lv for lv in levels if lv != spec.baseline]
    sub = effects.subset(keep)
    codes = np.array(codes)
    x = np.stack([(codes == lv).astype(np.float64) for lv in others], axis=1)
    nuis, strata = _nuisance(sub)
    X = _drop_collinear(_design(x, nuis), 1 + len(others))
    y = sub.ae
    fit = ols_hc1(y, X)
    cols = list(range(1, 1 + len(others)))
    null = _perm_t(y, X, cols, strata, n_perm, np.random.default_rng(seed)) if n_perm else None
    out = []
    for j, lv in enumerate(others):
        c = cols[j]
        p = perm_pvalue(fit.t[c], null[:, j]) if n_perm else float("nan")
        out.append(TestResult(spec.name, condition, f"{lv} - {spec.baseline}", float(fit.beta[c]),
                              float(fit.se[c]), float(fit.t[c]), p, len(y), n_perm,
                              float(y[codes == lv].mean()), float(y[codes == spec.baseline].mean())))
    return out


def same_vs_other(row: StructureId) -> ContrastSpec:
    return ContrastSpec(f"C1_{row.short}", lambda a, t: None if a != row else (1 if t == row else -1),
                        f"{row.short}-adapted: same-structure vs other test sets")


def rc_vs_coordination(coord: StructureId | None = None) -> ContrastSpec:
    """RC-adapted models on other RCs (+1) vs. on coordination (-1)."""
    targets = COORD if coord is None else [coord]
    name = "C2_RC_vs_coord" if coord is None else f"C2_RC_vs_{coord.short}"

    def code(a, t):
        if not a.is_rc or t == a:
            return None
        if t.is_rc:
            return 1
        return -1 if t in targets else None
    return ContrastSpec(name, code, "RC adaptation: other RC vs coordination tests")


def reduction_contrast() -> ContrastSpec:
    cls = CLASSES["reduction"]

    def code(a, t):
        if a not in cls.rows:
            return None
        return 1 if t in cls.in_class[a] else (-1 if t in cls.out_class[a] else None)
    return ContrastSpec("C3_reduction", code, "object RCs: same vs different reduction")


def voice_levels() -> ContrastSpec:
    """Object/passive RCs: tests sharing reduction, voice, or neither; baseline voice."""
    obj = CLASSES["reduction"].rows

    def code(a, t):
        if a not in obj or t not in obj or t == a:
            return None
        if t.reduced == a.reduced:
            return "reduction_match"
        if t.passive == a.passive:
            return "passive_match"
        return "no_match"
    return ContrastSpec("C4_voice", code, "object RCs by shared property", baseline="passive_match")


# ---------------------------------------------------------------------------
# model-level regressions


def model_regression(name: str, y: Mapping[str, float], info: Mapping[str, Mapping],
                     n_perm: int = 10000, seed: int = 0, condition: str = "trained") -> list[TestResult]:
    """Regress a per-model score on centred log2 nhid, log2 corpus size and their product."""
    ids = sorted(m for m in y if m in info and np.isfinite(y[m]))
    if len(ids) < 5:
        raise ValueError(f"needs at least 5 models, have {len(ids)}")
    h = np.log2([float(info[m]["nhid"]) for m in ids])
    c = np.log2([float(info[m]["csize"]) for m in ids])
    terms, cols = [], []
    for label, v in (("log2_nhid", h), ("log2_csize", c)):
        if np.ptp(v) > 0:
            terms.append(label)
            cols.append(v - v.mean())
    if not cols:
        raise ValueError("nhid and corpus size are constant across models")
    if len(cols) == 2:
        terms.append("interaction")
        cols.append(cols[0] * cols[1])
    X = _design(np.stack(cols, axis=1), None)
    yv = np.array([y[m] for m in ids])
    if len(ids) <= X.shape[1]:
        raise ValueError(f"{len(ids)} models for {X.shape[1]} parameters")
    fit = ols_hc1(yv, X)
    idx = list(range(1, X.shape[1]))
    null = _perm_t(yv, X, idx, np.zeros(len(ids)), n_perm, np.random.default_rng(seed)) if n_perm else None
    return [TestResult(name, condition, term, float(fit.beta[j]), float(fit.se[j]), float(fit.t[j]),
                       perm_pvalue(fit.t[j], null[:, k]) if n_perm else float("nan"), len(ids), n_perm)
            for k, (term, j) in enumerate(zip(terms, idx))]


# ---------------------------------------------------------------------------
# the suite


@dataclass
class Skipped:
    name: str
    condition: str
    reason: str


@dataclass
class AnalysisReport:
    results: list[TestResult] = field(default_factory=list)
    skipped: list[Skipped] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"results": [r.to_dict() for r in self.results],
                "skipped": [asdict(s) for s in self.skipped]}

    def table(self) -> str:
        head = f"{'test':<20} {'condition':<22} {'term':<34} {'estimate':>9} {'se':>8} {'t':>8} {'p':>12} {'n':>6}"
        lines = [head, "-" * len(head)]
        for r in self.results:
            lines.append(f"{r.name:<20} {r.condition:<22} {r.term:<34} {r.estimate:>9.4f} {r.se:>8.4f} "
                         f"{r.t:>8.2f} {r.label:>12} {r.n:>6}")
        for s in self.skipped:
            lines.append(f"{s.name:<20} {s.condition:<22} skipped: {s.reason}")
        return "\n".join(lines) + "\n"

    def summary(self, alpha: float = 0.05) -> str:
        sig = [r for r in self.results if r.p < alpha]
        lines = [f"{len(self.results)} tests, {len(sig)} with p < {alpha}, {len(self.skipped)} skipped."]
        for r in sig:
            direction = "higher" if r.estimate > 0 else "lower"
            lines.append(f"  {r.name} [{r.condition}] {r.term}: {direction} ({r.estimate:+.4f}, {r.label})")
        return "\n".join(lines) + "\n"


def _attempt(report, name, condition, fn):
    try:
        out = fn()
    except ValueError as exc:
        report.skipped.append(Skipped(name, condition, str(exc)))
        return
    report.results.extend(out if isinstance(out, list) else [out])


def condition_of(info: Mapping) -> str:
    return f"{info.get('kind', 'trained')}-h{info.get('nhid', '?')}-c{info.get('csize', '?')}"


def analysis_suite(effects: Effects, model_info: Mapping[str, Mapping] | None = None,
                   accuracy: Mapping[str, float] | None = None, n_perm: int = 10000,
                   seed: int = 0) -> AnalysisReport:
    """Run C.1-C.4 per condition, then C.5-C.6 across trained models.

    Conditions group models sharing kind, nhid and corpus size.  Tests
    that cannot be fit are reported as skipped with the reason.
    """
    info = dict(model_info or {})
    for m in effects.models:
        info.setdefault(m, {"kind": "trained"})
    report = AnalysisReport()
    conds: dict[str, list[str]] = {}
    for m in effects.models:
        conds.setdefault(condition_of(info[m]), []).append(m)
    k = 0
    for cond in sorted(conds):
        sub = effects.subset(np.isin(effects.raw.model_id, conds[cond]))
        specs = [same_vs_other(s) for s in STRUCTURES]
        specs += [rc_vs_coordination()] + [rc_vs_coordination(c) for c in COORD]
        specs += [reduction_contrast()]
        for spec in specs:
            k += 1
            _attempt(report, spec.name, cond,
                     lambda spec=spec, k=k: fit_contrast(sub, spec, n_perm, seed + k, cond))
        k += 1
        _attempt(report, "C4_voice", cond,
                 lambda k=k: fit_contrasts(sub, voice_levels(), n_perm, seed + k, cond))

    trained = {m: v for m, v in info.items() if v.get("kind", "trained") == "trained" and m in effects.models}
    dtab = distance_table(effects.subset(np.isin(effects.raw.model_id, sorted(trained)))) if trained else {}
    for cls in ("same_rc", "reduction", "rc"):
        k += 1
        _attempt(report, f"C5_D_{cls}", "trained",
                 lambda cls=cls, k=k: model_regression(f"C5_D_{cls}", {m: d[cls] for m, d in dtab.items()},
                                                       trained, n_perm, seed + k))
    k += 1
    if accuracy:
        _attempt(report, "C6_accuracy", "trained",
                 lambda: model_regression("C6_accuracy", {m: a for m, a in accuracy.items() if m in trained},
                                          trained, n_perm, seed + k))
    else:
        report.skipped.append(Skipped("C6_accuracy", "trained", "no agreement accuracies supplied"))
    return report


def ks_uniform(pvalues: Sequence[float]) -> float:
    """KS p-value of ``pvalues`` against U(0, 1)."""
    return float(sps.kstest(np.asarray(pvalues, dtype=np.float64), "uniform").pvalue)
