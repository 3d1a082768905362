"""Command-line entry point: ``synpriming gen|train|run|analyze|report|selftest``.

Settings come from defaults, then ``--config`` (JSON), then the
environment (``PRIMING_OUT_DIR``, ``PRIMING_WORKERS``), then flags.

Exit codes: 0 success, 1 usage error, 2 data error, 3 failed numerical check.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, lm, metrics, priming, report, stats, templates
from .corpus import read_text_corpus, synthetic_corpus, write_text_corpus

log = logging.getLogger("synpriming")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "out_dir": "out",
    "seed": 0,
    "workers": 1,
    "lexicon": None,
    "corpus": {"file": None, "tokens": [120000], "clists": 1},
    "lists": {"n_lists": 5, "adapt_size": 20, "test_size": 50, "p_plural": 0.4, "p_adjective": 0.5,
              "p_intensifier": 0.4, "p_adverb_present": 0.5, "p_postverbal": 0.5},
    "agreement": {"n_per_construction": 50},
    "model": {"nhid": [100], "nlayers": 2, "epochs": 3, "learning_rate": 20.0, "bptt_len": 35,
              "batch_size": 32, "baseline": True},
    "adapt": {"learning_rate": 2.0, "clip": 0.25},
    "analysis": {"n_perm": 10000, "n_boot": 1000},
}


class DataError(Exception):
    pass


class NumericError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        cfg = _merge(cfg, user)
    if os.environ.get("PRIMING_OUT_DIR"):
        cfg["out_dir"] = os.environ["PRIMING_OUT_DIR"]
    if os.environ.get("PRIMING_WORKERS"):
        try:
            cfg["workers"] = int(os.environ["PRIMING_WORKERS"])
        except ValueError:
            raise DataError("PRIMING_WORKERS must be an integer") from None
    flag_map = {
        "out_dir": ("out_dir",), "seed": ("seed",), "workers": ("workers",),
        "n_lists": ("lists", "n_lists"), "corpus_tokens": ("corpus", "tokens"),
        "corpus_file": ("corpus", "file"), "nhid": ("model", "nhid"), "epochs": ("model", "epochs"),
        "n_perm": ("analysis", "n_perm"), "n_boot": ("analysis", "n_boot"),
    }
    for flag, path in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            node = cfg
            for p in path[:-1]:
                node = node[p]
            node[path[-1]] = v
    return cfg


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path, schema: str) -> dict:
    if not path.exists():
        raise DataError(f"missing {path}; run the earlier stage first")
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("schema") != schema:
        raise DataError(f"{path}: expected schema {schema!r}")
    return doc


def _lexicon(cfg):
    try:
        return templates.load_lexicon(cfg["lexicon"])
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read lexicon: {exc}") from None


# ---------------------------------------------------------------------------
# stages


def cmd_gen(cfg) -> None:
    out = Path(cfg["out_dir"]) / "corpora"
    out.mkdir(parents=True, exist_ok=True)
    lex, compat = _lexicon(cfg)
    seed = int(cfg["seed"])
    entries = []
    if cfg["corpus"]["file"]:
        tokens = read_text_corpus(cfg["corpus"]["file"])
        if not tokens:
            raise DataError(f"corpus file {cfg['corpus']['file']} is empty")
        name = "external.txt"
        write_text_corpus(tokens, out / name)
        entries.append({"file": name, "clist": 0, "csize": len(tokens), "source": "file"})
    else:
        for clist in range(int(cfg["corpus"]["clists"])):
            for size in cfg["corpus"]["tokens"]:
                name = f"synthetic-c{size}-s{clist}.txt"
                write_text_corpus(synthetic_corpus(lex, compat, int(size), seed=seed * 1000 + clist), out / name)
                entries.append({"file": name, "clist": clist, "csize": int(size), "source": "synthetic"})
    lc = cfg["lists"]
    noise = templates.NoiseConfig(lc["p_plural"], lc["p_adjective"], lc["p_intensifier"],
                                  lc["p_adverb_present"], lc["p_postverbal"], rng_seed=seed)
    lists = templates.generate_lists(lex, compat, int(lc["n_lists"]), noise,
                                     int(lc["adapt_size"]), int(lc["test_size"]))
    templates.write_lists(lists, out / "lists.tsv")
    pairs = templates.agreement_pairs(lex, compat, int(cfg["agreement"]["n_per_construction"]),
                                      np.random.default_rng([seed, 7]))
    templates.write_pairs(pairs, out / "agreement.tsv")
    _dump_json({"schema": "synpriming-corpora", "version": 1, "corpora": entries,
                "lists": "lists.tsv", "agreement": "agreement.tsv", "noise": asdict(noise)},
               out / "manifest.json")
    print(f"wrote {len(entries)} corpora, {len(lists)} lists, {len(pairs)} agreement pairs to {out}")


def cmd_train(cfg) -> None:
    root = Path(cfg["out_dir"])
    corpora = _read_json(root / "corpora" / "manifest.json", "synpriming-corpora")
    ck = root / "checkpoints"
    ck.mkdir(parents=True, exist_ok=True)
    mc = cfg["model"]
    models = {}
    for entry in corpora["corpora"]:
        tokens = read_text_corpus(root / "corpora" / entry["file"])
        vocab = lm.Vocabulary.build(tokens)
        for nhid in mc["nhid"]:
            hyper = lm.LstmHyper(nhid=int(nhid), nlayers=int(mc["nlayers"]), epochs=int(mc["epochs"]),
                                 learning_rate=float(mc["learning_rate"]), bptt_len=int(mc["bptt_len"]),
                                 batch_size=int(mc["batch_size"]), corpus_tokens=len(tokens),
                                 seed=int(cfg["seed"]) * 1000 + entry["clist"])
            base = {"nhid": int(nhid), "csize": entry["csize"], "clist": entry["clist"], "corpus": entry["file"]}
            mid = f"lstm-h{nhid}-c{entry['csize']}-s{entry['clist']}"
            log.info("training %s", mid)
            snap = lm.train(tokens, hyper, vocab)
            lm.save_checkpoint(snap, ck / f"{mid}.ckpt")
            models[mid] = dict(base, kind="trained", file=f"{mid}.ckpt",
                               held_out_surprisal=round(snap.provenance["valid_loss"][-1] / np.log(2), 6))
            if mc["baseline"]:
                rid = f"random-h{nhid}-c{entry['csize']}-s{entry['clist']}"
                rnd = lm.random_init(hyper, vocab)
                lm.save_checkpoint(rnd, ck / f"{rid}.ckpt")
                models[rid] = dict(base, kind="baseline", file=f"{rid}.ckpt",
                                   held_out_surprisal=round(snap.provenance["valid_loss"][0] / np.log(2), 6))
    _dump_json({"schema": "synpriming-checkpoints", "version": 1, "models": models}, ck / "manifest.json")
    print(f"wrote {len(models)} checkpoints to {ck}")


def _manifest(root: Path) -> dict:
    return _read_json(root / "checkpoints" / "manifest.json", "synpriming-checkpoints")["models"]


def cmd_run(cfg, resume: bool = False) -> None:
    root = Path(cfg["out_dir"])
    models = _manifest(root)
    lists_path = root / "corpora" / "lists.tsv"
    if not lists_path.exists():
        raise DataError(f"missing {lists_path}; run gen first")
    lists = templates.read_lists(lists_path)
    out = root / "records" / "records.tsv"
    plan = priming.ExperimentPlan({m: str(root / "checkpoints" / v["file"]) for m, v in models.items()},
                                  lists, lm.AdaptConfig(**cfg["adapt"]), out, int(cfg["seed"]),
                                  int(cfg["workers"]))
    if resume and out.exists():
        try:
            partial = priming.read_records(out)
        except (templates.SchemaError, ValueError):
            partial = []
        records = priming.resume(plan, partial)
    else:
        records = priming.run_grid(plan)
    print(f"wrote {len(records)} records to {out}")


def cmd_analyze(cfg) -> None:
    root = Path(cfg["out_dir"])
    models = _manifest(root)
    rec_path = root / "records" / "records.tsv"
    if not rec_path.exists():
        raise DataError(f"missing {rec_path}; run the grid first")
    records = priming.read_records(rec_path)
    out = root / "analysis"
    ac = cfg["analysis"]
    seed = int(cfg["seed"])
    effects = metrics.adaptation_effects(records)

    fits = {m: {"beta0": f.beta0, "beta1": f.beta1, "se": f.se, "p": f.p, "surp_mean": f.surp_mean}
            for m, f in effects.fits.items()}
    conds: dict[str, list[str]] = {}
    for m in effects.models:
        conds.setdefault(stats.condition_of(models.get(m, {})), []).append(m)
    matrices, hier = {}, {}
    for cond, ids in sorted(conds.items()):
        sub = effects.subset(np.isin(effects.raw.model_id, ids))
        am = metrics.adaptation_matrix(sub, int(ac["n_boot"]), seed)
        matrices[cond] = am.to_dict()
        hier[cond] = metrics.build_hierarchy(am.mean).to_dict()
    pairs_path = root / "corpora" / "agreement.tsv"
    accuracy = {}
    if pairs_path.exists():
        pairs = templates.read_pairs(pairs_path)
        for m, v in sorted(models.items()):
            accuracy[m] = metrics.agreement_accuracy(lm.load_checkpoint(root / "checkpoints" / v["file"]), pairs)
    rep = stats.analysis_suite(effects, models, {m: a["overall"] for m, a in accuracy.items()},
                               int(ac["n_perm"]), seed)

    def clean(x):
        if isinstance(x, float):
            return None if not np.isfinite(x) else round(x, 9)
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        return x

    _dump_json({"schema": "synpriming-fits", "version": 1, "fits": clean(fits)}, out / "fits.json")
    _dump_json({"schema": "synpriming-matrices", "version": 1, "conditions": matrices}, out / "matrices.json")
    _dump_json({"schema": "synpriming-distances", "version": 1,
                "distances": clean(metrics.distance_table(effects))}, out / "distances.json")
    _dump_json({"schema": "synpriming-hierarchy", "version": 1, "conditions": hier}, out / "hierarchy.json")
    _dump_json({"schema": "synpriming-agreement-accuracy", "version": 1, "accuracy": clean(accuracy)},
               out / "agreement.json")
    _dump_json(dict(rep.to_dict(), schema="synpriming-tests", version=1), out / "tests.json")
    (out / "tests.txt").write_text("# synpriming-tests v1\n" + rep.table() + "\n" + rep.summary(),
                                   encoding="utf-8")
    print(rep.summary(), end="")


def cmd_report(cfg) -> None:
    root = Path(cfg["out_dir"])
    mats = _read_json(root / "analysis" / "matrices.json", "synpriming-matrices")["conditions"]
    out = root / "report"
    for cond, d in sorted(mats.items()):
        mean = np.array([[np.nan if x is None else x for x in row] for row in d["mean"]])
        report.write_svg(report.heatmap_svg(mean, d["labels"], f"Adaptation effect (bits), {cond}"),
                         out / f"heatmap-{cond}.svg")
        if np.all(np.isfinite(mean)):
            tree = metrics.build_hierarchy(mean, d["labels"])
            report.write_svg(report.dendrogram_svg(tree, f"Structure similarity, {cond}"),
                             out / f"dendrogram-{cond}.svg")
    print(f"wrote figures for {len(mats)} conditions to {out}")


def cmd_selftest(cfg) -> None:
    """Gradient check on a toy float64 LSTM and a k-gram count check."""
    rng = np.random.default_rng(int(cfg["seed"]))
    vocab = lm.Vocabulary(("<eos>", "<unk>") + tuple(f"w{i}" for i in range(10)))
    snap = lm.random_init(lm.LstmHyper(nhid=6, nlayers=2, emb_dim=5, init_scale=0.5), vocab, seed=0, dtype=np.float64)
    batch = rng.integers(0, len(vocab), size=(2, 8))
    err = lm.gradient_check(snap, batch)
    print(f"gradient check: max relative error {err:.3e}")
    if not err < 1e-4:
        raise NumericError(f"gradient check failed ({err:.3e} >= 1e-4)")
    toks = ["w1", "w2", "<eos>", "w1", "w3", "<eos>"]
    km = lm.kgram_model(toks * 2, lm.KGramHyper(order=2, alpha=0.1), vocab)
    p = 2 ** -lm.surprisal(km, ["w1", "w2", "<eos>"]).values[1]
    want = (2 + 0.1) / (4 + 0.1 * len(vocab))
    print(f"k-gram check: p(w2|w1) = {p:.12f}, expected {want:.12f}")
    if abs(p - want) > 1e-9:
        raise NumericError("k-gram probability mismatch")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out-dir", dest="out_dir", help="output root (default: out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="synpriming", description="Syntactic priming experiments with small language models.")
    p.add_argument("--version", action="version", version=f"synpriming {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="write corpora, experiment lists and agreement pairs")
    g.add_argument("--n-lists", dest="n_lists", type=int)
    g.add_argument("--corpus-tokens", dest="corpus_tokens", type=int, nargs="+")
    g.add_argument("--corpus-file", dest="corpus_file", help="use a text file instead of the synthetic grammar")

    t = sub.add_parser("train", parents=[common], help="train LSTMs and write random-init baselines")
    t.add_argument("--nhid", type=int, nargs="+")
    t.add_argument("--epochs", type=int)

    r = sub.add_parser("run", parents=[common], help="run the adaptation grid")
    r.add_argument("--resume", action="store_true", help="keep complete cells from an earlier run")

    a = sub.add_parser("analyze", parents=[common], help="effects, matrices, distances and tests")
    a.add_argument("--n-perm", dest="n_perm", type=int)
    a.add_argument("--n-boot", dest="n_boot", type=int)

    sub.add_parser("report", parents=[common], help="SVG heatmaps and dendrograms")
    sub.add_parser("selftest", parents=[common], help="numerical self-checks")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        if int(cfg["workers"]) < 1:
            raise DataError("workers must be at least 1")
        if args.command == "gen":
            cmd_gen(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "run":
            cmd_run(cfg, args.resume)
        elif args.command == "analyze":
            cmd_analyze(cfg)
        elif args.command == "report":
            cmd_report(cfg)
        else:
            cmd_selftest(cfg)
    except NumericError as exc:
        print(f"synpriming: numerical check failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, KeyError, ValueError, templates.SchemaError, lm.CheckpointError) as exc:
        print(f"synpriming: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
