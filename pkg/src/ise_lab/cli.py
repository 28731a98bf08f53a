"""Command-line entry point: ``ise-lab run | ablate | eval | gen``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import ablation
from .clustering import dbscan
from .config import Config, load_config, parse_pairs
from .errors import ConfigError, IseLabError
from .synthdata import LabeledDataset, dump, generate, load
from .trainer import RECORD_COLUMNS, Trainer, clustering_domain, evaluate_state

log = logging.getLogger("ise_lab")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

EPILOG = """\
run.csv columns, one row per epoch, '.' decimal point, full precision:
  epoch                 1-based epoch index
  n_clusters, n_noise   DBSCAN outcome after the epoch's updates
  l_se, l_lp            mean sample-extension and label-preserving losses (nan if skipped)
  fowlkes_mallows, adjusted_rand, adjusted_mutual_info, v_measure
                        clustering quality against true ids (noise excluded)
  map, cmc1, cmc5, cmc10
                        retrieval on QUERY against GALLERY rows
  lambda                interpolation degree at the end of the epoch (0 outside ISE mode)
Arm CSVs written by 'ablate' prepend a seed column.

exit codes: 0 ok, 1 some ablation arms failed, 2 config or input error,
3 runtime invariant violation. Errors are also printed to stderr as
ERROR code=<n> kind=<name> msg=<json string>.

ISE_LAB_THREADS caps BLAS threads and parallel ablation workers.
"""


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # strict JSON has no NaN
        return None if math.isnan(obj) else float(obj)
    return obj


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(_json_safe(obj), indent=2, allow_nan=False) + "\n")


def threads_from_env() -> int:
    raw = os.environ.get("ISE_LAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"ISE_LAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("ISE_LAB_THREADS must be a positive integer")
    return n


def _resolve(args) -> Config:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(args.config, overrides)


def _dataset(args, cfg: Config) -> LabeledDataset:
    return load(args.data) if args.data else generate(cfg.scenario())


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    return out


def cmd_run(args) -> int:
    cfg = _resolve(args)
    ds = _dataset(args, cfg)
    out = _out_dir(args.out)
    (out / "config.toml").write_text(cfg.to_text())
    result = Trainer(cfg, dump_dir=out).run(ds)
    rows = [r.row() for r in result.records]
    write_csv(out / "run.csv", RECORD_COLUMNS, rows)
    final = ds.copy()
    final.embeddings = result.embeddings
    dump(final, out / "embeddings.txt")
    write_json(out / "summary.json", {
        "seed": cfg.seed,
        "mode": cfg.train.mode.value,
        "epochs": len(rows),
        "initial": result.initial,
        "final": rows[-1],
        "config": cfg.flat(),
    })
    last = rows[-1]
    log.info("done: clusters=%d ari=%.4f map=%.4f -> %s", last["n_clusters"], last["adjusted_rand"],
             last["map"], out)
    return EXIT_OK


def parse_manifest(path) -> dict:
    """Read an ablation manifest.

    Recognised keys: ``seeds`` (comma or space list), ``matrix`` (names of
    built-in matrices), ``config`` (base config file, relative to the
    manifest), ``set.<key>`` base overrides and ``arm.<name>.<key>`` custom
    arms.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {p}: {exc.strerror or exc}") from None
    m = {"seeds": None, "matrix": [], "config": None, "set": [], "arms": {}}
    for key, raw in parse_pairs(text, str(p)):
        raw = raw.strip().strip("'\"")
        if key == "seeds":
            try:
                m["seeds"] = [int(v) for v in raw.strip("[]").replace(",", " ").split()]
            except ValueError:
                raise ConfigError(f"{p}: seeds must be integers") from None
        elif key == "matrix":
            for name in raw.strip("[]").replace(",", " ").split():
                name = name.strip("'\"").lower()
                if name not in ablation.MATRICES:
                    raise ConfigError(f"{p}: unknown matrix {name!r}; known: {', '.join(ablation.MATRICES)}")
                m["matrix"].append(name)
        elif key == "config":
            m["config"] = (p.parent / raw) if raw else None
        elif key.startswith("set."):
            m["set"].append((key[4:], raw))
        elif key.startswith("arm."):
            parts = key.split(".", 2)
            if len(parts) < 3:
                raise ConfigError(f"{p}: arm keys look like arm.<name>.<section>.<key>")
            m["arms"].setdefault(parts[1], {})[parts[2]] = raw
        else:
            raise ConfigError(f"{p}: unknown manifest key {key!r}")
    if m["seeds"] is None:
        raise ConfigError(f"{p}: manifest has no seeds")
    return m


def cmd_ablate(args) -> int:
    m = parse_manifest(args.manifest)
    seeds = [args.seed] if args.seed is not None else m["seeds"]
    if not seeds:
        raise ConfigError("seed list is empty")
    base = load_config(args.config)
    if m["config"] is not None:
        base = load_config(m["config"], base=base)
    base = load_config(None, m["set"] + list(args.set or []), base=base)
    arms = {}
    for name in m["matrix"]:
        arms.update(ablation.MATRICES[name])
    arms.update(m["arms"])
    if not arms:
        raise ConfigError("manifest defines no arms; set matrix = components or add arm.<name>.<key> lines")

    out = _out_dir(args.out)
    workers = threads_from_env()
    results = ablation.run_matrix(base, arms, seeds, workers=workers)

    outputs = []
    for arm in arms:
        rows = [dict(seed=r.seed, **row) for r in results if r.arm == arm and r.error is None for row in r.rows]
        name = f"arm_{arm}.csv"
        write_csv(out / name, ablation.arm_columns(), rows)
        outputs.append(name)
    write_csv(out / "ablation_summary.csv", ablation.summary_columns(), ablation.summarise(results))
    outputs.append("ablation_summary.csv")
    failures = [{"arm": r.arm, "seed": r.seed, "error": r.error} for r in results if r.error is not None]
    fingerprints = {}
    for s in seeds:
        cfg = ablation.arm_config(base, s, {})
        fingerprints[s] = ablation.dataset_fingerprint(generate(cfg.scenario()))
    write_json(out / "manifest.json", {
        "manifest": str(args.manifest),
        "seeds": seeds,
        "matrices": m["matrix"],
        "base_config": base.flat(),
        "arms": arms,
        "dataset_sha256": fingerprints,
        "outputs": outputs + ["manifest.json"],
        "failures": failures,
    })
    for f in failures:
        _error(EXIT_FAILED, "arm", f"{f['arm']} seed {f['seed']}: {f['error']}")
    return EXIT_FAILED if failures else EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    ds = load(args.embeddings)
    domain = clustering_domain(ds, cfg.train.train_on)
    table = ds.embeddings
    report = {"n_samples": ds.n}
    if domain.size:
        state = dbscan(table[domain], cfg.cluster.eps, cfg.cluster.min_points)
        ev = evaluate_state(ds, table, domain, state)
        clustering = {"n_clusters": ev["n_clusters"], "n_noise": ev["n_noise"]}
        if np.all(ds.true_ids[domain] >= 0):
            clustering.update({k: ev[k] for k in ("fowlkes_mallows", "adjusted_rand",
                                                  "adjusted_mutual_info", "v_measure")})
        report["clustering"] = clustering
        if ds.mask("QUERY").any():
            report["retrieval"] = {k: ev[k] for k in ("map", "cmc1", "cmc5", "cmc10")}
    print(json.dumps(_json_safe(report), indent=2, allow_nan=False))
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(args.out)
    ds = generate(cfg.scenario())
    dump(ds, out / "dataset.txt")
    log.info("wrote %d samples to %s", ds.n, out / "dataset.txt")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    p = argparse.ArgumentParser(prog="ise-lab", description="Implicit sample extension on synthetic embeddings.",
                                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="train one configuration",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("--data", help="train on a dataset dump instead of generating one")
    r.add_argument("--out", default="runs/latest", help="output directory (default: runs/latest)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("ablate", parents=[common], help="run an arm matrix over several seeds",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    a.add_argument("manifest", help="manifest file (seeds, matrix, config, set.*, arm.*)")
    a.add_argument("--out", default="runs/ablation", help="output directory (default: runs/ablation)")
    a.set_defaults(func=cmd_ablate)

    e = sub.add_parser("eval", parents=[common], help="score a dataset dump as JSON")
    e.add_argument("embeddings", help="dump file in the dataset text format")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gen", parents=[common], help="write a synthetic dataset dump")
    g.add_argument("--out", default="runs/data", help="output directory (default: runs/data)")
    g.set_defaults(func=cmd_gen)
    return p


def _error(code: int, kind: str, msg: str) -> int:
    print(f"ERROR code={code} kind={kind} msg={json.dumps(msg)}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        with threadpool_limits(limits=threads_from_env()):
            return args.func(args)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "config", str(exc))
    except IseLabError as exc:
        return _error(EXIT_RUNTIME, "invariant", str(exc))
    except FloatingPointError as exc:
        return _error(EXIT_RUNTIME, "numeric", str(exc))


if __name__ == "__main__":
    sys.exit(main())
