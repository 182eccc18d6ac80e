"""Command-line front end.

Subcommands mirror the library drivers: `canon` prints canonical
certificates for a graph6 file, `iso` compares two graphs exactly or with
the particle screen, `train` / `study` run the experiment drivers from a
config file, and `dataset make` materializes a named corpus on disk.

Reports go to stdout as aligned tables; `--out DIR` additionally writes
the machine-readable JSON and CSV forms. Exit status is 0 when the run's
asserted checks pass (or the command has none), 1 when a check fails, and
2 on usage or input errors. PFGNN_THREADS caps worker processes.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from .errors import PfgnnError
from .experiments import (
    ExperimentConfig,
    RunReport,
    ablation,
    evaluate_checkpoint,
    pf_hash_distinguished,
    run_iso_experiment,
    runtime_study,
    train_csl,
    variance_study,
    wl_certificate,
)
from .datasets import DATASET_SPECS, make_dataset, save_dataset, verify_csl
from .graphs import read_graph6_file
from .search import canonical_form, iso_exact


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _print_table(rows: list[dict], file=None) -> None:
    file = file if file is not None else sys.stdout
    if not rows:
        print("(no rows)", file=file)
        return
    cols = list(rows[0].keys())
    cells = [[_fmt(r.get(c, "")) for c in cols] for r in rows]
    widths = [
        max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)
    ]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)), file=file)
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)), file=file)


def _emit(report: RunReport, out_dir: str | None) -> int:
    _print_table(report.rows)
    if report.summary:
        print()
        for k, v in report.summary.items():
            print(f"{k}: {_fmt(v)}")
    if report.checks:
        print()
        for name, ok in report.checks.items():
            print(f"check {name}: {'PASS' if ok else 'FAIL'}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_json(out / f"{report.name}.json")
        report.write_csv(out / f"{report.name}.csv")
        print(f"\nwrote {out / (report.name + '.json')} and .csv")
    return 0 if report.passed else 1


def _cfg_from_args(args, task: str) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_file(args.config)
        if cfg.task != task:
            cfg = cfg.override(task=task)
    else:
        cfg = ExperimentConfig.defaults_for(task)
    return cfg.override(
        K=getattr(args, "K", None),
        T=getattr(args, "T", None),
        alpha=getattr(args, "alpha", None),
        gamma=getattr(args, "gamma", None),
        epochs=getattr(args, "epochs", None),
        seed=getattr(args, "seed", None),
        out_dir=getattr(args, "out", None),
    )


def _cmd_canon(args) -> int:
    graphs = read_graph6_file(args.file)
    rows = []
    for i, g in enumerate(graphs):
        form, _witness = canonical_form(g)
        rows.append(
            {
                "index": i,
                "n": g.n,
                "edges": len(g.edges),
                "certificate": hashlib.sha256(form).hexdigest()[:16],
            }
        )
    report = RunReport(
        name="canon",
        config={"file": str(args.file)},
        rows=rows,
        summary={"graphs": len(rows), "distinct": len({r["certificate"] for r in rows})},
        checks={},
    )
    return _emit(report, args.out)


def _cmd_iso(args) -> int:
    ga = read_graph6_file(args.a)
    gb = read_graph6_file(args.b)
    if len(ga) != len(gb):
        raise PfgnnError(
            f"{args.a} holds {len(ga)} graphs but {args.b} holds {len(gb)}; "
            "iso compares them position by position"
        )
    rows = []
    for i, (x, y) in enumerate(zip(ga, gb)):
        row = {
            "pair": i,
            "n1": x.n,
            "n2": y.n,
            "wl_equal": wl_certificate(x) == wl_certificate(y),
        }
        if args.mode == "exact":
            row["isomorphic"] = iso_exact(x, y)
        else:
            row["distinguished"] = pf_hash_distinguished(
                x, y, K=args.K, T=args.T, alpha=args.alpha,
                seed=args.seed + i,
            )
        rows.append(row)
    if args.mode == "exact":
        summary = {"isomorphic_pairs": sum(r["isomorphic"] for r in rows)}
    else:
        summary = {"distinguished_pairs": sum(r["distinguished"] for r in rows)}
    report = RunReport(
        name=f"iso-{args.mode}",
        config={
            "a": str(args.a), "b": str(args.b), "mode": args.mode,
            "K": args.K, "T": args.T, "alpha": args.alpha, "seed": args.seed,
        },
        rows=rows,
        summary=summary,
        checks={},
    )
    return _emit(report, args.out)


def _cmd_train(args) -> int:
    task = {"csl": "train-csl", "eval": "eval"}[args.task]
    cfg = _cfg_from_args(args, task)
    report = train_csl(cfg) if task == "train-csl" else evaluate_checkpoint(cfg)
    return _emit(report, args.out)


def _cmd_study(args) -> int:
    task = {
        "variance": "variance-study",
        "runtime": "runtime-study",
        "ablation": "ablation",
    }[args.kind]
    cfg = _cfg_from_args(args, task)
    driver = {
        "variance-study": variance_study,
        "runtime-study": runtime_study,
        "ablation": ablation,
    }[task]
    return _emit(driver(cfg), args.out)


def _cmd_dataset_make(args) -> int:
    ds = make_dataset(args.spec, seed=args.seed, path=args.path)
    if args.spec == "csl":
        verify_csl(ds)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} graphs ({ds.name}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pfgnn", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("canon", help="canonical certificates for a graph6 file")
    c.add_argument("file")
    c.add_argument("--out", default=None, help="directory for JSON/CSV output")
    c.set_defaults(fn=_cmd_canon)

    i = sub.add_parser("iso", help="compare two graph6 files pairwise")
    i.add_argument("a")
    i.add_argument("b")
    i.add_argument("--mode", choices=("exact", "pf-hash"), default="exact")
    i.add_argument("--K", type=int, default=4, help="particles (pf-hash)")
    i.add_argument("--T", type=int, default=2, help="chain steps (pf-hash)")
    i.add_argument("--alpha", type=float, default=0.5, help="resampling mix")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", default=None)
    i.set_defaults(fn=_cmd_iso)

    t = sub.add_parser("train", help="train or evaluate the chain classifier")
    t.add_argument("--task", choices=("csl", "eval"), default="csl")
    t.add_argument("--config", default=None, help="JSON or TOML config file")
    t.add_argument("--K", type=int, default=None)
    t.add_argument("--T", type=int, default=None)
    t.add_argument("--gamma", type=float, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", default=None)
    t.set_defaults(fn=_cmd_train)

    s = sub.add_parser("study", help="variance / runtime / ablation studies")
    s.add_argument("kind", choices=("variance", "runtime", "ablation"))
    s.add_argument("--config", default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=_cmd_study)

    d = sub.add_parser("dataset", help="dataset utilities")
    dsub = d.add_subparsers(dest="dataset_command", required=True)
    m = dsub.add_parser("make", help="materialize a named corpus")
    m.add_argument("spec", choices=DATASET_SPECS)
    m.add_argument("--out", required=True, help="output directory")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--path", default=None, help="source file for file-backed specs")
    m.set_defaults(fn=_cmd_dataset_make)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (PfgnnError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
