"""
Command-line front end.

    cassl analyze  [--config F] [--preset P] [--seed S] --out DIR
    cassl rank     REPORT --out DIR
    cassl train    [--config F] [--preset P] [--seed S] --out DIR
    cassl baseline {random,staged,random-curriculum} [...] --out DIR
    cassl report   RUN_REPORT... --out DIR

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .curriculum import build_curriculum, energy_table
from .learner import save_model
from .loop import (RunReport, collect_initial, train_cassl, train_random_baseline, train_random_curriculum,
                   train_staged_baseline)
from .quasirandom import saltelli_design
from .sensitivity import SensitivityReport, analyze, analyze_dataset

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
OUTPUT_SCHEMA_VERSION = 1

log = logging.getLogger("cassl")


def _dump(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _envelope(kind: str, config: dict, **body) -> dict:
    return {"schema_version": OUTPUT_SCHEMA_VERSION, "kind": kind, "config": config, **body}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_analyze(args) -> int:
    cfg = ExperimentConfig.resolve(args.config, args.preset, args.seed)
    env = cfg.environment()
    space = env.space
    s = cfg.raw["sampler"]
    design = saltelli_design(space.k, int(s["n_base"]), bool(s.get("second_order", True)))
    out = _out_dir(args)
    if env.deterministic:
        report = analyze(design, env.evaluate_batch(space.from_unit(design.rows)), space.names)
    else:
        data = collect_initial(env, space, design, np.random.default_rng(cfg.seed))
        data.write_jsonl(out / "initial.jsonl", {"config": cfg.raw})
        report = analyze_dataset(space, design, data)
    _dump(out / "sensitivity.json", _envelope("sensitivity", cfg.raw, report=report.to_dict(),
                                               design_rows=design.n_rows))
    print(f"wrote {out / 'sensitivity.json'}")
    return EXIT_OK


def _load_report(path) -> tuple[SensitivityReport, dict]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sensitivity report {path}: {exc}") from exc
    body = data.get("report", data)
    try:
        return SensitivityReport.from_dict(body), data.get("config", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path} is not a sensitivity report: {exc}") from exc


def cmd_rank(args) -> int:
    report, source_cfg = _load_report(args.report)
    cur = build_curriculum(report)
    out = _out_dir(args)
    echo = {"report": str(args.report), "source_config": source_cfg}
    _dump(out / "curriculum.json", _envelope("curriculum", echo, curriculum=cur.to_dict(),
                                              energy_table=energy_table(report, cur)))
    print(" > ".join("{" + ", ".join(s) + "}" for s in cur.named_stages()))
    return EXIT_OK


def _write_run(out: Path, tag: str, cfg: ExperimentConfig, model, data, report: RunReport) -> None:
    data.write_jsonl(out / f"{tag}.dataset.jsonl", {"config": cfg.raw, "method": report.method})
    save_model(model, out / f"{tag}.model.json")
    model_doc = json.loads((out / f"{tag}.model.json").read_text())
    _dump(out / f"{tag}.model.json", {**model_doc, "config": cfg.raw})
    _dump(out / f"{tag}.report.json", {**report.to_dict(), "config": cfg.raw})
    print(f"{tag}: novel {report.final_novel:.3f} seen {report.final_seen:.3f} "
          f"({report.n_evaluations} evaluations)")


def cmd_train(args) -> int:
    cfg = ExperimentConfig.resolve(args.config, args.preset, args.seed)
    env = cfg.environment()
    model, data, report = train_cassl(env, env.space, cfg.run_config(), cfg.seed)
    _write_run(_out_dir(args), f"cassl-s{cfg.seed}", cfg, model, data, report)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = ExperimentConfig.resolve(args.config, args.preset, args.seed)
    cfg.raw["baseline"]["kind"] = args.kind
    env = cfg.environment()
    space, run = env.space, cfg.run_config()
    if args.kind == "random":
        model, data, report = train_random_baseline(env, space, cfg.baseline_budget(space.k), run, cfg.seed)
    elif args.kind == "staged":
        model, data, report = train_staged_baseline(env, space, cfg.staged_budgets(space.k), run, cfg.seed)
    else:
        model, data, report = train_random_curriculum(env, space, run, cfg.seed, cfg.raw["baseline"]["order"])
    _write_run(_out_dir(args), f"{args.kind}-s{cfg.seed}", cfg, model, data, report)
    return EXIT_OK


_COMPARISON_COLUMNS = ("schema_version", "method", "seed", "eval_seen", "eval_novel", "expected_seen",
                       "expected_novel", "n_evaluations", "curriculum")
_STAGE_COLUMNS = ("schema_version", "method", "seed", "checkpoint", "collection_rate", "eval_seen", "eval_novel",
                  "expected_seen", "expected_novel")


def _fmt(v):
    return "" if v is None else (f"{v:.6f}" if isinstance(v, float) else str(v))


def cmd_report(args) -> int:
    runs = []
    for path in args.reports:
        try:
            data = json.loads(Path(path).read_text())
            runs.append((path, RunReport.from_dict({k: v for k, v in data.items() if k != "config"}),
                         data.get("config", {})))
        except (OSError, json.JSONDecodeError, TypeError, KeyError) as exc:
            raise ConfigError(f"cannot read run report {path}: {exc}") from exc
    runs.sort(key=lambda r: (r[1].method, r[1].seed, str(r[0])))
    out = _out_dir(args)
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_COMPARISON_COLUMNS)
        for _, r, _ in runs:
            order = " ".join(r.curriculum["flat_order"]) if r.curriculum else ""
            w.writerow([_fmt(v) for v in (OUTPUT_SCHEMA_VERSION, r.method, r.seed, r.final_seen, r.final_novel,
                                          r.expected_seen[-1], r.expected_novel[-1], r.n_evaluations, order)])
    with open(out / "stages.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_STAGE_COLUMNS)
        for _, r, _ in runs:
            for n, label in enumerate(r.checkpoints):
                w.writerow([_fmt(v) for v in (OUTPUT_SCHEMA_VERSION, r.method, r.seed, label,
                                              r.collection_rates[n], r.eval_seen[n], r.eval_novel[n],
                                              r.expected_seen[n], r.expected_novel[n])])
    summary = {}
    for _, r, _ in runs:
        s = summary.setdefault(r.method, {"runs": 0, "eval_novel": [], "eval_seen": []})
        s["runs"] += 1
        s["eval_novel"].append(r.final_novel)
        s["eval_seen"].append(r.final_seen)
    for s in summary.values():
        s["mean_novel"] = float(np.mean(s.pop("eval_novel")))
        s["mean_seen"] = float(np.mean(s.pop("eval_seen")))
    echo = {"reports": [str(p) for p, _, _ in runs], "run_configs": [c for _, _, c in runs]}
    _dump(out / "report.json", _envelope("comparison", echo, methods=summary))
    for method, s in sorted(summary.items()):
        print(f"{method:18s} runs {s['runs']:3d}  novel {s['mean_novel']:.3f}  seen {s['mean_seen']:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cassl", description="Sensitivity-driven curriculum self-supervised learning.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def experiment(sp):
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--preset", help="base preset (desk or paper)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", required=True, help="output directory")

    experiment(sub.add_parser("analyze", help="collect the quasi-random design and compute Sobol indices"))
    r = sub.add_parser("rank", help="build a curriculum from a sensitivity report")
    r.add_argument("report")
    r.add_argument("--out", required=True)
    experiment(sub.add_parser("train", help="run the full curriculum loop"))
    b = sub.add_parser("baseline", help="run a comparison baseline")
    b.add_argument("kind", choices=("random", "staged", "random-curriculum"))
    experiment(b)
    rep = sub.add_parser("report", help="tabulate run reports")
    rep.add_argument("reports", nargs="+")
    rep.add_argument("--out", required=True)
    return p


COMMANDS = {"analyze": cmd_analyze, "rank": cmd_rank, "train": cmd_train, "baseline": cmd_baseline,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every other failure maps to the runtime exit code
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
