"""Command line: ``scdl {learn,classify,msi,bench,synth}``.

Settings come from an optional JSON config file; flags override it. Exit
status is 0 on success, 2 for configuration errors, 3 for data errors and 4
for numerical failures.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import data as hsidata
from .errors import ConfigError, ScdlError
from .pipeline import (PipelineConfig, classify_codes, encode_cube, load_inputs,
                       run_bench, run_msi, select_and_fit, write_json, write_ppm,
                       write_predictions)
from .svm import load_model, save_model

# flag name -> config field
FLAGS = {
    "cube": str, "labels": str, "train": str, "test": str, "fraction": float,
    "mode": str, "patch": int, "window": int, "moments": str, "atoms": int,
    "atoms_frac": float, "sigma2": float, "gamma": float, "C": float,
    "solver": str, "iters": int, "threads": int, "seed": int, "repeats": int,
    "bins": int, "out": str,
}
RENAMED = {"iters": "outer_iters", "bins": "msi_bins"}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scdl", description="Sparse (contextual) dictionary learning for hyperspectral "
                                 "image classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with pipeline settings")
        for name, typ in FLAGS.items():
            p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
        return p

    common(sub.add_parser("learn", help="learn a dictionary and code every pixel"))
    p = common(sub.add_parser("classify", help="code, train the SVM and evaluate"))
    p.add_argument("--dictionary", help="dictionary header from 'learn' (learned if omitted)")
    p.add_argument("--model", help="saved SVM model to reuse instead of training")
    p = common(sub.add_parser("msi", help="HSI vs simulated MSI and coarse-HSI accuracy"))
    p.add_argument("--reuse-C", dest="reuse_C", action="store_true", default=None,
                   help="use the HSI-level C instead of cross-validating per level")
    common(sub.add_parser("bench", help="time learning at 1, 2 and 4 threads"))

    p = sub.add_parser("synth", help="write a synthetic mixture scene")
    p.add_argument("--out", default="synth")
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--bands", type=int, default=16)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--snr", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def load_config(args, need_labels=True):
    overrides = {}
    for name in FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[RENAMED.get(name, name)] = value
    if getattr(args, "reuse_C", None):
        overrides["reuse_C"] = True
    if args.command == "bench" and "outer_iters" in overrides:
        overrides["bench_iters"] = overrides.pop("outer_iters")
    if args.config:
        cfg = PipelineConfig.from_file(args.config, **overrides)
    else:
        cfg = PipelineConfig.from_dict(overrides)
    return cfg.validate(need_labels=need_labels)


def _path(cfg, name):
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def cmd_learn(cfg, log=print):
    cube, train, _ = load_inputs(cfg)
    learned = select_and_fit(cube, train, cfg)
    hsidata.save_dictionary(_path(cfg, "dictionary.json"), learned.D)
    hsidata.save_codes(_path(cfg, "codes.json"), learned.codes)
    with open(_path(cfg, "learn_report.jsonl"), "w") as fh:
        for rec in learned.report.records():
            fh.write(json.dumps(rec) + "\n")
    settings = {"mode": cfg.mode, "atoms": learned.D.shape[1], "gamma": learned.gamma,
                "window": learned.window, "atoms_frac": learned.atoms_frac,
                "iterations": learned.report.n_iter, "converged": learned.report.converged}
    write_json(_path(cfg, "learn_settings.json"), settings)
    log(f"learned {learned.D.shape[1]} atoms in {learned.report.n_iter} iterations; "
        f"final objective {learned.report.objective[-1]:.6g}")
    return learned


def _classify_once(cfg, dictionary=None, model=None):
    cube, train, test = load_inputs(cfg)
    if dictionary is not None:
        D = hsidata.load_dictionary(dictionary)
        settings = _learn_settings(dictionary)
        codes = encode_cube(D, cube, cfg, window=settings.get("window"),
                            gamma=settings.get("gamma"))
    else:
        codes = select_and_fit(cube, train, cfg).codes
    return cube, test, classify_codes(codes, cube.shape, train, test, cfg, model=model)


def _learn_settings(dictionary):
    path = os.path.join(os.path.dirname(os.path.abspath(dictionary)), "learn_settings.json")
    if os.path.exists(path):
        with open(path) as fh:
            return json.load(fh)
    return {}


def cmd_classify(cfg, dictionary=None, model_path=None, log=print):
    model = load_model(model_path) if model_path else None
    runs = []
    for r in range(cfg.repeats):
        run_cfg = PipelineConfig(**{**cfg.to_dict(), "seed": cfg.seed + r})
        cube, test, result = _classify_once(run_cfg, dictionary, model)
        runs.append(result.report)
        if r == 0:
            write_predictions(_path(cfg, "predictions.csv"), test, result.test_pred)
            write_ppm(_path(cfg, "classmap.ppm"), result.class_map)
            save_model(_path(cfg, "model.json"), result.model)
            report = {"C": result.C, "cv_scores": result.cv_scores, **result.report.to_dict()}
            write_json(_path(cfg, "report.json"), report)
        log(f"seed {run_cfg.seed}: OA {result.report.OA:.4f}  AA {result.report.AA:.4f}  "
            f"kappa {result.report.kappa:.4f}")
    if cfg.repeats > 1:
        summary = {}
        for key in ("OA", "AA", "kappa"):
            vals = np.array([getattr(rep, key) for rep in runs])
            summary[key] = {"mean": float(vals.mean()), "std": float(vals.std()),
                            "runs": vals.tolist()}
        write_json(_path(cfg, "summary.json"), summary)
        log("  ".join(f"{k} {v['mean']:.4f} +/- {v['std']:.4f}" for k, v in summary.items()))
    return runs


def cmd_msi(cfg, log=print):
    cube, train, test = load_inputs(cfg)
    _, results = run_msi(cube, train, test, cfg)
    report = {name: {"C": res.C, **res.report.to_dict()} for name, res in results.items()}
    write_json(_path(cfg, "msi_report.json"), report)
    for name, res in results.items():
        log(f"{name:5s} OA {res.report.OA:.4f}  AA {res.report.AA:.4f}  "
            f"kappa {res.report.kappa:.4f}")
    return results


def cmd_bench(cfg, log=print):
    cube, train, _ = load_inputs(cfg)
    runs = run_bench(cube, train, cfg)
    write_json(_path(cfg, "bench.json"), {"mode": cfg.mode, "runs": runs})
    for r in runs:
        log(f"{r['threads']} thread(s): {r['total_seconds']:.2f} s, "
            f"speedup {r['speedup']:.2f}")
    return runs


def cmd_synth(args, log=print):
    from .synthetic import mixture_scene

    scene = mixture_scene(args.height, args.width, args.bands, args.classes,
                          snr_db=args.snr, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    hsidata.save_cube(os.path.join(args.out, "cube.json"), scene.cube)
    hsidata.save_labels(os.path.join(args.out, "labels.csv"), scene.labels)
    log(f"wrote {args.out}/cube.json and {args.out}/labels.csv")
    return scene


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            cmd_synth(args)
        elif args.command == "learn":
            cmd_learn(load_config(args))
        elif args.command == "classify":
            cmd_classify(load_config(args), args.dictionary, args.model)
        elif args.command == "msi":
            cmd_msi(load_config(args))
        elif args.command == "bench":
            cmd_bench(load_config(args))
    except ScdlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except TypeError as exc:
        # wrong value types inside a config file
        if args.command != "synth" and getattr(args, "config", None):
            print(f"error: config: {exc}", file=sys.stderr)
            return ConfigError.exit_code
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
