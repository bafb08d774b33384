"""Command-line harness: presets, experiment dispatch, report emission.

Subcommands: born-single, born-joint, marginals, chsh, mean-times,
appendix-check, validate-model.  Each runs a deterministic pipeline, writes
report.txt, table.csv, and figures into the output directory, echoes the
chosen format to stdout, and returns exit code 0 (success), 2 (success with a
regime-diagnostic flag), or 1 (error).
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import _run, gaussian
from .coincidence import (
    estimate_joint_probabilities,
    estimate_marginal_probabilities,
    mean_joint_time,
)
from .config import parse_config
from .detector import estimate_single_probabilities, mean_click_time
from .errors import TsdError
from .figures import emit_figures
from .model import (
    SingleSignalSpec,
    build_matrix_model,
    per_bin_covariance_stack,
    rotate_bases,
    validate_psd,
)
from .oracle import (
    CANONICAL_CHSH_ANGLES,
    chsh_from_correlations,
    chsh_value,
    correlation,
    state_from_correlations,
)
from .report import Report, emit_report, probability_rows, render_table, render_text

# Experiment presets: every physics number is overridable via config or flags.
PRESETS = {
    "born-single": {
        "model": {"kind": "single", "b": [[0.3, 0.0], [0.0, 0.0], [0.0, 0.0], [0.7, 0.0]], "e0": 0.0},
        "detector": {"dt": 0.01, "kappa": 0.01, "threshold": 4000.0, "max_time": 25000.0},
        "run": {"trials": 15000},
    },
    "born-joint": {
        "model": {"kind": "singlet", "e0": 25.0},
        "detector": {"dt": 0.02, "kappa": 0.08, "threshold": 330.0,
                     "coincidence_window": 1.76, "max_time": 400.0},
        "run": {"trials": 7000, "seed": 2},
    },
    "marginals": {
        "model": {"kind": "matrix", "e0": 0.0,
                  "sigma12": [[0.5477225575051661, 0.0], [0.0, 0.0],
                              [0.0, 0.0], [0.8366600265340756, 0.0]]},
        "detector": {"dt": 0.01, "kappa": 0.01, "threshold": 4000.0, "max_time": 25000.0},
        "run": {"trials": 10000},
    },
    "chsh": {
        "model": {"kind": "singlet", "e0": 25.0},
        "detector": {"dt": 0.02, "kappa": 0.08, "threshold": 330.0,
                     "coincidence_window": 1.76, "max_time": 400.0},
        "run": {"trials": 12500},
    },
    "mean-times": {
        "model": {"kind": "scalar", "scale": 1.0, "e0": 25.0},
        "detector": {"dt": 0.01, "kappa": 0.04, "threshold": 50.0,
                     "coincidence_window": 0.04, "max_time": 400.0},
        "run": {"trials": 4000},
    },
    "appendix-check": {
        "run": {"trials": 100000},
    },
    "validate-model": {
        "model": {"kind": "singlet", "e0": 25.0},
        "detector": {"dt": 0.01, "kappa": 0.04, "threshold": 50.0},
        "run": {"trials": 20},
    },
}


def _child_seeds(seed, n):
    return [int(s.generate_state(1)[0])
            for s in np.random.SeedSequence(int(seed)).spawn(n)]


def _base_items(config, workers):
    # the worker count never changes the numbers, so it stays out of the
    # report to keep output bytes identical for any parallelization
    del workers
    return config.echo()


def run_born_single(config, workers):
    model = config.single_signal_spec()
    rep = estimate_single_probabilities(
        model, None, config.detector_params(), config.discretization(),
        config.trials, config.seed, workers,
    )
    kot = rep.diagnostics["kappa_over_tau"]
    report = Report(
        kind="born-single",
        config_items=_base_items(config, workers),
        rows=probability_rows(rep),
        scalars=[
            {"label": "mean_click_time", "value": rep.tau_mean,
             "std_error": rep.tau_se, "oracle": None},
            {"label": "max_discrepancy", "value": rep.max_discrepancy,
             "std_error": None, "oracle": None},
        ],
        diagnostics=[
            ("total_clicks", rep.total_clicks),
            ("kappa_over_tau", kot),
            ("noclick_rate", rep.diagnostics["noclick_rate"]),
        ],
        regime_violation=bool(kot > 0.05),
    )
    return report


def run_born_joint(config, workers):
    model = config.correlation_model()
    rep = estimate_joint_probabilities(
        model, config.coincidence_params(), config.discretization(),
        config.trials, config.seed, workers,
    )
    report = Report(
        kind="born-joint",
        config_items=_base_items(config, workers),
        rows=probability_rows(rep),
        scalars=[
            {"label": "mean_joint_time", "value": rep.tau_mean,
             "std_error": rep.tau_se, "oracle": None},
            {"label": "max_discrepancy", "value": rep.max_discrepancy,
             "std_error": None, "oracle": None},
        ],
        diagnostics=[
            ("total_joint_clicks", rep.total_clicks),
            ("kappa_over_tau", rep.diagnostics["kappa_over_tau"]),
            ("sigma2_tau_over_e0", rep.diagnostics["sigma2_tau_over_e0"]),
            ("counting_mode", rep.diagnostics["counting_mode"]),
        ],
        regime_violation=bool(
            rep.diagnostics["kappa_over_tau"] > 0.05
            or rep.diagnostics["sigma2_tau_over_e0"] > 0.2
        ),
    )
    return report


def run_marginals(config, workers):
    model = config.correlation_model()
    side1, side2 = estimate_marginal_probabilities(
        model, config.coincidence_params(), config.discretization(),
        config.trials, config.seed, workers,
    )
    rows = []
    for side, rep in ((1, side1), (2, side2)):
        for row in probability_rows(rep):
            row["label"] = f"side {side} {row['label']}"
            rows.append(row)
    kot = max(side1.diagnostics["kappa_over_tau"],
              side2.diagnostics["kappa_over_tau"])
    report = Report(
        kind="marginals",
        config_items=_base_items(config, workers),
        rows=rows,
        scalars=[
            {"label": "max_discrepancy",
             "value": max(side1.max_discrepancy, side2.max_discrepancy),
             "std_error": None, "oracle": None},
        ],
        diagnostics=[
            ("side1_clicks", side1.total_clicks),
            ("side2_clicks", side2.total_clicks),
            ("kappa_over_tau", kot),
        ],
        regime_violation=bool(kot > 0.05),
    )
    return report


def run_chsh(config, workers):
    model = config.correlation_model()
    state = state_from_correlations(model.cross_matrix)
    a, a2, b, b2 = config.angles
    settings = [("E(a,b)", a, b), ("E(a,b')", a, b2),
                ("E(a',b)", a2, b), ("E(a',b')", a2, b2)]
    seeds = _child_seeds(config.seed, len(settings))
    params = config.coincidence_params()
    disc = config.discretization()
    corr_rows = []
    estimates = []
    ses = []
    flagged = False
    total_clicks = 0
    for (label, t1, t2), seed in zip(settings, seeds):
        rotated = rotate_bases(model, t1, t2)
        rep = estimate_joint_probabilities(
            rotated, params, disc, config.trials, seed, workers
        )
        p = rep.probabilities.reshape(2, 2)
        est = float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])
        se = float(np.sqrt(np.sum(rep.std_errors ** 2)))
        corr_rows.append({
            "label": label, "estimate": est, "std_error": se,
            "oracle": correlation(state, t1, t2),
        })
        estimates.append(est)
        ses.append(se)
        total_clicks += rep.total_clicks
        flagged = flagged or rep.diagnostics["kappa_over_tau"] > 0.05
    s_est = chsh_from_correlations(*estimates)
    s_se = float(np.sqrt(np.sum(np.array(ses) ** 2)))
    s_oracle = chsh_value(state, a, a2, b, b2)
    report = Report(
        kind="chsh",
        config_items=_base_items(config, workers),
        correlations=corr_rows,
        scalars=[
            {"label": "S", "value": s_est, "std_error": s_se,
             "oracle": s_oracle},
        ],
        diagnostics=[
            ("total_joint_clicks", total_clicks),
            ("counting_mode", params.counting_mode),
        ],
        regime_violation=flagged,
    )
    return report


def run_mean_times(config, workers):
    sigma2 = abs(config.scale) ** 2
    single_model = SingleSignalSpec(np.array([[sigma2]]), 0.0)
    det_single = config.detector_params()
    det_single = type(det_single)(
        kappa=det_single.kappa, threshold=det_single.threshold,
        background=0.0, max_time=det_single.max_time,
    )
    disc = config.discretization()
    seeds = _child_seeds(config.seed, 2)
    single = mean_click_time(
        single_model, det_single, disc, config.trials, seeds[0], workers
    )
    joint_model = config.correlation_model()
    joint = mean_joint_time(
        joint_model, config.coincidence_params(), disc,
        config.trials, seeds[1], workers,
    )
    report = Report(
        kind="mean-times",
        config_items=_base_items(config, workers),
        scalars=[
            {"label": "single_tau_mean", "value": single.tau_mean,
             "std_error": single.tau_se, "oracle": None},
            {"label": "single_tau_sigma2_over_threshold", "value": single.ratio,
             "std_error": None, "oracle": None},
            {"label": "joint_tau_mean", "value": joint.tau_mean,
             "std_error": joint.tau_se, "oracle": None},
            {"label": "joint_4e0_sigma2_tau_over_threshold2",
             "value": joint.ratio, "std_error": None, "oracle": None},
        ],
        diagnostics=[
            ("single_kappa_over_tau", single.kappa_over_tau),
            ("joint_kappa_over_tau", joint.kappa_over_tau),
            ("joint_sigma2_tau_over_e0",
             joint.diagnostics["sigma2_tau_over_e0"]),
            ("single_clicks", single.n_clicks),
            ("joint_clicks", joint.n_clicks),
        ],
        regime_violation=bool(
            single.regime_violation or joint.regime_violation
        ),
    )
    return report


def run_appendix_check(config, workers):
    del workers
    cases = gaussian.randomized_check(100, config.trials, config.seed)
    n_within = sum(1 for c in cases if c["within"])
    report = Report(
        kind="appendix-check",
        config_items=[
            ("experiment", "appendix-check"),
            ("run.trials", int(config.trials)),
            ("run.seed", int(config.seed)),
        ],
        scalars=[
            {"label": "cases", "value": len(cases), "std_error": None,
             "oracle": None},
            {"label": "within_3se", "value": n_within, "std_error": None,
             "oracle": len(cases)},
        ],
        diagnostics=[
            ("mc_samples_per_case", int(config.trials)),
        ],
        regime_violation=False,
    )
    return report


def run_validate_model(config, workers):
    del workers
    rng = np.random.default_rng(config.seed)
    disc = config.discretization()
    n_bins = min(disc.max_bins, 10 ** 4)
    s = disc.bin_times(0, n_bins)
    n_models = int(config.trials)
    failures = 0
    rebuild_mismatch = 0.0
    norm_drift = 0.0
    for _ in range(n_models):
        m = int(rng.integers(2, 4))
        g = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))
        model = build_matrix_model(g, float(rng.uniform(0.5, 50.0)))
        stack = per_bin_covariance_stack(model, s)
        ev = np.linalg.eigvalsh(stack)
        scale = np.abs(ev).max(axis=1)
        bad = ev.min(axis=1) < -1e-10 * np.where(scale > 0, scale, 1.0)
        failures += int(bad.sum())
        rebuilt = build_matrix_model(model.cross_matrix, model.background_energy)
        rebuild_mismatch = max(
            rebuild_mismatch,
            float(np.abs(rebuilt.side1_power - model.side1_power).max()),
            float(np.abs(rebuilt.side2_power - model.side2_power).max()),
        )
        if m == 2:
            theta = float(rng.uniform(0, np.pi))
            rotated = rotate_bases(model, theta, float(rng.uniform(0, np.pi)))
            norm_drift = max(
                norm_drift,
                abs(rotated.total_cross_power - model.total_cross_power),
            )
    configured = config.correlation_model()
    stack = per_bin_covariance_stack(configured, s)
    ok_configured = all(
        validate_psd(stack[t]) for t in range(0, n_bins, max(1, n_bins // 64))
    )
    report = Report(
        kind="validate-model",
        config_items=_base_items(config, 1),
        scalars=[
            {"label": "random_models", "value": n_models, "std_error": None,
             "oracle": None},
            {"label": "psd_failures", "value": failures, "std_error": None,
             "oracle": 0},
            {"label": "rebuild_mismatch", "value": rebuild_mismatch,
             "std_error": None, "oracle": 0.0},
            {"label": "rotation_norm_drift", "value": norm_drift,
             "std_error": None, "oracle": 0.0},
            {"label": "configured_model_psd", "value": int(ok_configured),
             "std_error": None, "oracle": 1},
        ],
        diagnostics=[("bins_checked", n_bins)],
        regime_violation=False,
    )
    if failures or not ok_configured or rebuild_mismatch > 1e-10:
        raise TsdError("model validation failed; see report")
    return report


PIPELINES = {
    "born-single": run_born_single,
    "born-joint": run_born_joint,
    "marginals": run_marginals,
    "chsh": run_chsh,
    "mean-times": run_mean_times,
    "appendix-check": run_appendix_check,
    "validate-model": run_validate_model,
}


def run_experiment(config):
    """Dispatch, write report files and figures, return (report, exit_code)."""
    workers = _run.resolve_workers(config.workers)
    report = PIPELINES[config.experiment](config, workers)
    emit_report(report, config.out_dir, config.out_format)
    emit_figures(report, config.out_dir)
    return report, report.exit_code


def _parse_angles(text):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("need exactly four angles a,a2,b,b2")
    return parts


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tsd",
        description=(
            "Monte Carlo threshold-detection simulator for classical Gaussian "
            "random signals, with analytic quantum reference values"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in PIPELINES:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--trials", type=int, default=None,
                       help="number of trials (MC samples for appendix-check)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (TSD_WORKERS overrides)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("report", "table"), default=None,
                       help="which rendering to echo to stdout")
        p.add_argument("--dt", type=float, default=None, help="time step")
        p.add_argument("--kappa", type=float, default=None,
                       help="smoothing window width")
        p.add_argument("--threshold", type=float, default=None,
                       help="detection threshold")
        p.add_argument("--background", type=float, default=None,
                       help="background energy E0")
        p.add_argument("--window", type=float, default=None,
                       help="coincidence window")
        p.add_argument("--angles", type=_parse_angles, default=None,
                       help="CHSH angles a,a2,b,b2 in radians")
    return parser


def _overrides_from_args(args):
    return {
        "model": {"e0": args.background},
        "detector": {
            "dt": args.dt,
            "kappa": args.kappa,
            "threshold": args.threshold,
            "coincidence_window": args.window,
        },
        "run": {
            "trials": args.trials,
            "seed": args.seed,
            "workers": args.workers,
        },
        "chsh": {"angles": args.angles},
        "output": {"dir": args.out, "format": args.format},
    }


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        config = parse_config(
            path=args.config,
            overrides=_overrides_from_args(args),
            experiment=args.command,
            preset=PRESETS.get(args.command, {}),
        )
        report, code = run_experiment(config)
    except TsdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rendered = (
        render_table(report) if config.out_format == "table"
        else render_text(report)
    )
    sys.stdout.write(rendered)
    elapsed = time.perf_counter() - started
    print(f"wall_clock_seconds = {elapsed:.3f}")
    return code


if __name__ == "__main__":
    sys.exit(main())
