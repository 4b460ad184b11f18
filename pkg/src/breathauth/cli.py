"""Command-line front-end for the full pipeline.

Subcommands: synth, features, enroll, confirm, identify, evaluate,
bench-identify, bench-kernels. A JSON config file (--config) supplies
defaults; explicit flags override it. Module errors exit non-zero with a
machine-readable JSON envelope on stderr. Reports carry no timestamps, so
identical configs and seeds reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import _kernels, auth, bench, synth
from .errors import BreathAuthError
from .features import (
    FeatureMatrix,
    SplitSpec,
    correlation_filter,
    extract_matrix,
    grouped_split,
    select_top_features,
    variance_filter,
)
from .learn import DEFAULT_GRID, SMALL_GRID, CVConfig
from .library import enroll_all, load, save
from .mfdfa import MfdfaConfig
from .signal import load_dataset

GRID_PRESETS = {"default": DEFAULT_GRID, "small": SMALL_GRID}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return doc


def _opt(args: argparse.Namespace, config: dict, key: str, default):
    """Flag value if given, else config-file value, else the built-in default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _grid_from(name_or_path: str) -> dict:
    if name_or_path in GRID_PRESETS:
        return dict(GRID_PRESETS[name_or_path])
    with open(name_or_path, "r", encoding="ascii") as fh:
        raw = json.load(fh)
    return {k: tuple(None if x is None else x for x in v) for k, v in raw.items()}


def _parse_weights(text: str) -> tuple[float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated weights, e.g. 0.3,0.7")
    return (parts[0], parts[1])


def _mfdfa_config(config: dict) -> MfdfaConfig | None:
    keys = ("min_scale", "max_scale_fraction", "n_scales", "detrend_order")
    overrides = {k: config[k] for k in keys if k in config}
    return MfdfaConfig(**overrides) if overrides else None


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


# -- subcommands -------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace, config: dict) -> int:
    n_users = int(_opt(args, config, "users", 10))
    recordings = int(_opt(args, config, "recordings", 10))
    length = int(_opt(args, config, "length", 15000))
    seed = int(_opt(args, config, "seed", 0))
    specs = synth.cohort_specs(n_users, seed=seed)
    synth.write_cohort(args.out_dir, specs, recordings_per_user=recordings, length=length)
    _emit(
        {
            "dataset_dir": args.out_dir,
            "users": n_users,
            "recordings_per_user": recordings,
            "length": length,
            "seed": seed,
        }
    )
    return 0


def cmd_features(args: argparse.Namespace, config: dict) -> int:
    recordings = load_dataset(args.dataset_dir)
    window = _opt(args, config, "window", None)
    slide = _opt(args, config, "slide", None)
    matrix, rejected = extract_matrix(
        recordings,
        window=None if window is None else int(window),
        slide=None if slide is None else int(slide),
        config=_mfdfa_config(config),
    )
    if not args.no_filters:
        matrix = correlation_filter(variance_filter(matrix))
    matrix.to_csv(args.out)
    _emit(
        {
            "out": args.out,
            "rows": matrix.n_rows,
            "rejected_segments": len(rejected),
            "feature_names": list(matrix.feature_names),
        }
    )
    return 0


def _cv_from(args: argparse.Namespace, config: dict, seed: int) -> CVConfig:
    grid = _grid_from(str(_opt(args, config, "grid", "default")))
    k = int(_opt(args, config, "cv_folds", 5))
    return CVConfig(k=k, grid=grid, seed=seed)


def cmd_enroll(args: argparse.Namespace, config: dict) -> int:
    matrix = FeatureMatrix.from_csv(args.features)
    seed = int(_opt(args, config, "seed", 0))
    jobs = int(_opt(args, config, "jobs", 1))
    cv = _cv_from(args, config, seed)
    test_rows = None
    if args.split:
        fraction = float(_opt(args, config, "train_fraction", 0.6))
        train, test = grouped_split(matrix, SplitSpec(train_fraction=fraction, seed=seed))
        test_rows = test
    else:
        train = matrix
    library = enroll_all(train, cv, jobs=jobs)
    top_k = _opt(args, config, "select_top", None)
    if top_k is not None:
        forests = {pair: pipe.model for pair, pipe in library.pipelines.items()}
        selected = select_top_features(train, forests, top_k=int(top_k))
        library = enroll_all(train.select_columns(selected), cv, jobs=jobs)
        if test_rows is not None:
            test_rows = test_rows.select_columns(selected)
    save(library, args.out)
    if test_rows is not None and args.test_out:
        test_rows.to_csv(args.test_out)
    _emit(
        {
            "library": args.out,
            "users": library.n_users,
            "models": library.n_models,
            "discarded": len(library.discarded),
            "selected_features": list(library.selected_features),
            "test_out": args.test_out if test_rows is not None else None,
        }
    )
    return 0


def _probe_rows(library, matrix: FeatureMatrix, user: str | None) -> np.ndarray:
    rows = matrix.rows_for_user(user) if user else matrix.values
    if matrix.feature_names != library.selected_features:
        matrix_sel = matrix.select_columns(library.selected_features)
        rows = matrix_sel.rows_for_user(user) if user else matrix_sel.values
    return rows


def cmd_confirm(args: argparse.Namespace, config: dict) -> int:
    library = load(args.library)
    matrix = FeatureMatrix.from_csv(args.features)
    eta_t = float(_opt(args, config, "eta_threshold", auth.DEFAULT_CONFIRM_THRESHOLD))
    alpha = float(_opt(args, config, "alpha", auth.DEFAULT_HT_ALPHA))
    block = _opt(args, config, "block", "ml")
    probe = _probe_rows(library, matrix, args.rows_user)
    if block == "ml":
        outcome = auth.confirm_ml(args.user, probe, library, eta_t=eta_t)
    else:
        outcome = auth.confirm_ht(args.user, probe, library, alpha=alpha, eta_t=eta_t)
    _emit(
        {
            "block": block,
            "claimed_user": outcome.claimed_user,
            "v": outcome.v,
            "n_comparisons": outcome.n_comparisons,
            "eta": outcome.eta,
            "eta_threshold": outcome.eta_t,
            "confirmed": outcome.confirmed,
        }
    )
    return 0


def cmd_identify(args: argparse.Namespace, config: dict) -> int:
    library = load(args.library)
    matrix = FeatureMatrix.from_csv(args.features)
    eta_t = float(_opt(args, config, "eta_threshold", auth.DEFAULT_IDENTIFY_THRESHOLD))
    alpha = float(_opt(args, config, "alpha", auth.DEFAULT_HT_ALPHA))
    weights = auth.FusionWeights(_parse_weights(str(_opt(args, config, "weights", "0.3,0.7"))))
    probe = _probe_rows(library, matrix, args.rows_user)
    v_ht = auth.identify(probe, library, "ht", alpha=alpha)
    v_ml = auth.identify(probe, library, "ml")
    fused = auth.fuse([v_ht, v_ml], weights)
    outcome = auth.decide_identity(fused, eta_t=eta_t)
    n = fused.n_users
    ranked = sorted(
        (
            {
                "user": fused.users[i],
                "fused_score": float(fused.scores[i]),
                "confidence_percent": 100.0 * float(fused.scores[i]) / (n - 1) if n > 1 else None,
                "v_ht": float(v_ht.scores[i]),
                "v_ml": float(v_ml.scores[i]),
            }
            for i in range(n)
        ),
        key=lambda r: (-r["fused_score"], r["user"]),
    )
    _emit(
        {
            "identified_user": outcome.identified_user,
            "confidence_percent": outcome.confidence,
            "eta_threshold": eta_t,
            "weights": list(weights.w),
            "ranking": ranked,
        }
    )
    return 0


def _trial_dict(t: auth.TrialResult) -> dict:
    return {
        "trial": t.trial,
        "split_seed": t.split_seed,
        "tcr_ht": t.tcr_ht,
        "tcr_ml": t.tcr_ml,
        "tallies": {k: list(v) for k, v in t.tallies.items()},
        "precision": t.precision,
        "accuracy": t.accuracy,
        "rank_fractions": {str(k): v for k, v in t.rank_fractions.items()},
        "n_users": t.n_users,
        "n_models": t.n_models,
    }


def cmd_evaluate(args: argparse.Namespace, config: dict) -> int:
    matrix = FeatureMatrix.from_csv(args.features)
    seed = int(_opt(args, config, "seed", 0))
    eval_config = auth.EvalConfig(
        n_trials=int(_opt(args, config, "trials", 66)),
        seed=seed,
        train_fraction=float(_opt(args, config, "train_fraction", 0.6)),
        cv=_cv_from(args, config, seed),
        eta_confirm=float(_opt(args, config, "eta_confirm", auth.DEFAULT_CONFIRM_THRESHOLD)),
        eta_identify=float(_opt(args, config, "eta_identify", auth.DEFAULT_IDENTIFY_THRESHOLD)),
        weights=_parse_weights(str(_opt(args, config, "weights", "0.3,0.7"))),
        ht_alpha=float(_opt(args, config, "alpha", auth.DEFAULT_HT_ALPHA)),
        jobs=int(_opt(args, config, "jobs", 1)),
    )
    report = auth.shuffle_trials(matrix, eval_config)
    doc = {
        "config": {
            "features": args.features,
            "n_trials": eval_config.n_trials,
            "seed": eval_config.seed,
            "train_fraction": eval_config.train_fraction,
            "cv_folds": eval_config.cv.k,
            "grid": {k: list(v) for k, v in eval_config.cv.grid.items()},
            "eta_confirm": eval_config.eta_confirm,
            "eta_identify": eval_config.eta_identify,
            "weights": list(eval_config.weights),
            "ht_alpha": eval_config.ht_alpha,
        },
        "trials": [_trial_dict(t) for t in report.trials],
        "summary": report.summary(),
    }
    with open(args.out, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.csv:
        with open(args.csv, "w", encoding="ascii") as fh:
            fh.write(
                "trial,split_seed,tcr_ht,tcr_ml,"
                "t_ht,f_ht,h_ht,t_ml,f_ml,h_ml,t_fused,f_fused,h_fused,"
                "top1,top2,top3\n"
            )
            for t in report.trials:
                tallies = [str(x) for ch in ("ht", "ml", "fused") for x in t.tallies[ch]]
                fh.write(
                    f"{t.trial},{t.split_seed},{t.tcr_ht!r},{t.tcr_ml!r},"
                    + ",".join(tallies)
                    + f",{t.rank_fractions[1]!r},{t.rank_fractions[2]!r},{t.rank_fractions[3]!r}\n"
                )
    _emit({"out": args.out, "csv": args.csv, "summary": doc["summary"]})
    return 0


def cmd_bench_identify(args: argparse.Namespace, config: dict) -> int:
    user_counts = [int(x) for x in str(_opt(args, config, "users", "10,15,20,25,30")).split(",")]
    report = bench.bench_identify(
        user_counts,
        repeats=int(_opt(args, config, "repeats", 3)),
        seed=int(_opt(args, config, "seed", 0)),
    )
    if args.out:
        bench.write_identify_csv(report, args.out)
    _emit(report.to_dict())
    return 0


def cmd_bench_kernels(args: argparse.Namespace, config: dict) -> int:
    rows = bench.bench_kernels(repeats=int(_opt(args, config, "repeats", 5)))
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write("task,backend,seconds\n")
            for r in rows:
                fh.write(f"{r['task']},{r['backend']},{r['seconds']!r}\n")
    _emit({"active_backend": _kernels.backend_name(), "results": rows})
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breathauth",
        description="Breath-turbulence biometrics: synthesis, features, enrollment, authentication.",
    )
    parser.add_argument("--config", help="JSON config file supplying option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--users", type=int)
    p.add_argument("--recordings", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract the feature matrix from a dataset")
    p.add_argument("--dataset-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int)
    p.add_argument("--slide", type=int)
    p.add_argument("--no-filters", action="store_true", help="skip variance/correlation filters")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("enroll", help="build the pairwise model library")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", action="store_true", help="grouped train/test split first")
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--test-out", dest="test_out", help="write the held-out test rows (with --split)")
    p.add_argument("--select-top", type=int, dest="select_top", help="importance-based top-k selection")
    p.add_argument("--grid", help="'default', 'small', or a JSON grid file")
    p.add_argument("--cv-folds", type=int, dest="cv_folds")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("confirm", help="confirm a claimed user against probe features")
    p.add_argument("--library", required=True)
    p.add_argument("--features", required=True, help="probe feature CSV")
    p.add_argument("--user", required=True, help="claimed user id")
    p.add_argument("--rows-user", dest="rows_user", help="restrict probe rows to this user id")
    p.add_argument("--block", choices=("ml", "ht"))
    p.add_argument("--eta-threshold", type=float, dest="eta_threshold")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_confirm)

    p = sub.add_parser("identify", help="identify the user behind probe features")
    p.add_argument("--library", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--rows-user", dest="rows_user")
    p.add_argument("--eta-threshold", type=float, dest="eta_threshold")
    p.add_argument("--weights", help="fusion weights 'w_ht,w_ml'")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", help="shuffle-trial evaluation with full metrics")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--csv", help="per-trial CSV report path")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--grid")
    p.add_argument("--cv-folds", type=int, dest="cv_folds")
    p.add_argument("--eta-confirm", type=float, dest="eta_confirm")
    p.add_argument("--eta-identify", type=float, dest="eta_identify")
    p.add_argument("--weights")
    p.add_argument("--alpha", type=float)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench-identify", help="identification time vs library size")
    p.add_argument("--users", help="comma-separated user counts, e.g. 10,15,20,25,30")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench_identify)

    p = sub.add_parser("bench-kernels", help="compiled vs NumPy kernel timings")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_bench_kernels)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except BreathAuthError as exc:
        json.dump(
            {"error": type(exc).__name__.removesuffix("Error"), "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 2
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
