import numpy as np
import pytest

from synpriming import metrics as M, priming, stats as S
from synpriming.templates import STRUCTURES, StructureId


def _effects(fn, models=("m",), lists=(0, 1), per_cell=3, seed=0):
    rng = np.random.default_rng(seed)
    r_pre = np.random.default_rng(seed + 1)
    recs = []
    for m in models:
        for lid in lists:
            for a in STRUCTURES:
                for t in STRUCTURES:
                    for k in range(per_cell):
                        v = fn(a, t, rng)
                        s0 = 5.0 + r_pre.normal()
                        recs.append(priming.SurprisalRecord(m, a, t, lid, k, s0, s0 - v))
    return M.adaptation_effects(recs, group_by="all")


def test_pm1_slope_is_half_the_mean_difference():
    e = _effects(lambda a, t, r: r.normal() + (2.0 if a == t else 0.0))
    spec = S.same_vs_other(STRUCTURES[0])
    res = S.fit_contrast(e, spec, n_perm=0, nuisance=False)
    assert res.estimate == pytest.approx((res.mean_pos - res.mean_neg) / 2, abs=1e-12)


def test_hc1_matches_manual_formula(rng):
    X = np.column_stack([np.ones(40), rng.normal(size=40)])
    y = X @ [1.0, 2.0] + rng.normal(size=40) * (1 + np.abs(X[:, 1]))
    fit = S.ols_hc1(y, X)
    b = np.linalg.lstsq(X, y, rcond=None)[0]
    e = y - X @ b
    bread = np.linalg.inv(X.T @ X)
    cov = bread @ (X.T * e ** 2) @ X @ bread * 40 / 38
    np.testing.assert_allclose(fit.se, np.sqrt(np.diag(cov)))


def test_strong_effect_gets_minimal_pvalue():
    e = _effects(lambda a, t, r: r.normal(0, 0.1) + (1.0 if a == t else 0.0))
    res = S.fit_contrast(e, S.same_vs_other(STRUCTURES[2]), n_perm=199, seed=1)
    assert res.p == pytest.approx(1 / 200)
    assert res.label == "p<5e-03"


def test_permutation_is_reproducible():
    e = _effects(lambda a, t, r: r.normal())
    spec = S.rc_vs_coordination()
    assert S.fit_contrast(e, spec, 99, seed=3).p == S.fit_contrast(e, spec, 99, seed=3).p


def test_p_labels():
    assert S.p_label(1 / 10001, 10000) == "p<1e-04"
    assert S.p_label(0.25, 10000) == "p=0.25"
    assert S.p_label(float("nan"), 0) == "p=NA"


def test_multilevel_contrast_reports_each_level_against_baseline():
    bump = {"reduction_match": 0.5, "passive_match": 0.0, "no_match": -0.5}
    spec = S.voice_levels()

    def value(a, t, r):
        lv = spec.code(a, t)
        return r.normal(0, 0.05) + (bump[lv] if lv else 0.0)
    res = S.fit_contrasts(_effects(value), spec, n_perm=99)
    by = {r.term: r for r in res}
    assert by["reduction_match - passive_match"].estimate == pytest.approx(0.5, abs=0.05)
    assert by["no_match - passive_match"].estimate == pytest.approx(-0.5, abs=0.05)


def test_contrast_codes():
    uorc, rorc, cps = StructureId.parse("UORC"), StructureId.parse("RORC"), StructureId.parse("CPSORC")
    rvc = S.rc_vs_coordination().code
    assert rvc(uorc, rorc) == 1 and rvc(uorc, cps) == -1 and rvc(uorc, uorc) is None and rvc(cps, uorc) is None


def test_model_regression_needs_enough_models():
    with pytest.raises(ValueError, match="at least 5"):
        S.model_regression("x", {"a": 1.0}, {"a": {"nhid": 10, "csize": 100}})


def test_model_regression_recovers_slopes(rng):
    info, y = {}, {}
    for i, (h, c) in enumerate([(h, c) for h in (16, 32, 64) for c in (1000, 2000, 4000)]):
        info[f"m{i}"] = {"nhid": h, "csize": c}
        y[f"m{i}"] = 0.5 * np.log2(h) + 0.1 * np.log2(c) + rng.normal(0, 1e-3)
    res = {r.term: r for r in S.model_regression("D", y, info, n_perm=99)}
    assert res["log2_nhid"].estimate == pytest.approx(0.5, abs=0.01)
    assert res["log2_csize"].estimate == pytest.approx(0.1, abs=0.01)
    assert abs(res["interaction"].estimate) < 0.01


def test_suite_reports_skips_with_reasons():
    e = _effects(lambda a, t, r: r.normal() + (1.0 if a == t else 0.0))
    rep = S.analysis_suite(e, {"m": {"kind": "trained", "nhid": 8, "csize": 100}}, None, n_perm=49)
    names = {r.name for r in rep.results}
    assert {f"C1_{s.short}" for s in STRUCTURES} <= names
    assert "C2_RC_vs_coord" in names and "C3_reduction" in names and "C4_voice" in names
    skipped = {s.name: s.reason for s in rep.skipped}
    assert "at least 5" in skipped["C5_D_same_rc"]
    assert "C6_accuracy" in skipped
    assert "skipped" in rep.table()
    assert rep.to_dict()["results"][0]["p_label"].startswith("p")


def test_ks_uniform_flags_nonuniform():
    assert S.ks_uniform(np.linspace(0.001, 0.999, 500)) > 0.5
    assert S.ks_uniform(np.full(500, 0.01)) < 1e-6
