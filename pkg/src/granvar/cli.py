"""The ``granvar`` command line tool.

Subcommands:

* ``estimate``   evaluate the closed-form estimators on a scenario
* ``simulate``   replicate a selection design and compare estimators
* ``intercept``  transect sampling, transition counts, adjacency dependence
* ``table1``     the canonical single-class dependence solution grid
* ``verify``     run the built-in consistency checks

Every run is driven by a JSON scenario (except ``table1`` and ``verify``)
and a mandatory seed; outputs are CSV files whose first line records the
tool version, the scenario hash and the seed.  Output is byte-identical
across reruns and across ``--threads`` settings.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 runtime model error.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import estimators as est
from .errors import ConfigError, GranvarError
from .fields import generate_field, save_field_csv
from .intercept import (
    adjacency_dependence_for_field,
    calibrate_against_oracle,
    cast_transects,
    markov_fit,
    size_corrected_frequencies,
    transition_counts,
)
from .model import derive_expectation, derive_summary
from .scenario import ScenarioConfig, build_design, load_scenario
from .selection import compare_estimators, empirical_dependence, run_replicates
from .util import format_sig, round_sig
from .verify import DEFAULT_VERIFY_SEED, run_checks

#: Stream indices for deriving per-stage seeds from the scenario seed.
_FIELD_STREAM, _REPLICATE_STREAM, _TRANSECT_STREAM, _CALIBRATE_STREAM = range(4)


def _stage_seed(master_seed: int, stream: int) -> int:
    ss = np.random.SeedSequence((master_seed, stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class _Writer:
    """CSV writer stamping every file with version, config hash and seed."""

    def __init__(self, out_dir: Path, config_hash: str, seed: int):
        self.out_dir = out_dir
        self.config_hash = config_hash
        self.seed = seed
        out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def provenance(self) -> str:
        return f"granvar={__version__} config={self.config_hash} seed={self.seed}"

    def write(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
        path = self.out_dir / name
        with path.open("w", encoding="utf-8", newline="\n") as f:
            f.write(f"# {self.provenance}\n")
            f.write(",".join(header) + "\n")
            for row in rows:
                f.write(",".join(_cell(v) for v in row) + "\n")
        return path


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_sig(float(v))


def _resolve_out_dir(args, config: ScenarioConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    if config is not None and config.out_dir:
        return Path(config.out_dir)
    env = os.environ.get("GRANVAR_OUT")
    if env:
        return Path(env)
    return Path("granvar_out")


def _load(args) -> ScenarioConfig:
    if not args.config:
        raise ConfigError("--config", "this subcommand needs a scenario file")
    config = load_scenario(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def cmd_estimate(args) -> int:
    config = _load(args)
    writer = _Writer(_resolve_out_dir(args, config), config.config_hash, config.seed)
    table = config.table
    k = table.k
    dep = config.dependence.values if config.dependence is not None else np.zeros((k, k))

    rows = []
    if config.expected_counts is not None:
        exp = derive_expectation(config.expected_counts, table)
        r = est.variance_expected(exp, table, dep)
        rows.append(("variance_expected", r.value, r.gy_term, r.correction_term))
    if config.sample_counts is not None:
        sample = derive_summary(config.sample_counts, table)
        r = est.variance_sample(sample, table, dep)
        rows.append(("variance_sample", r.value, r.gy_term, r.correction_term))
        h = est.variance_ht(sample, table, dep)
        rows.append(("variance_ht", h.value, h.gy_term, h.correction_term))
        gy = est.variance_gy(sample, table)
        rows.append(("variance_gy", gy, gy, 0.0))
        analyte_classes = [i for i in range(k) if table.concentrations[i] > 0]
        if len(analyte_classes) == 1:
            i = analyte_classes[0]
            v_gy = est.gy_reference_variance(
                sample.concentration, table.concentrations[i], table.masses[i], sample.mass
            )
            rows.append(("gy_reference_single_class", v_gy, v_gy, 0.0))
            single = est.ht_single_class(
                sample.concentration, table.concentrations[i], table.masses[i],
                sample.mass, sample.counts[i], dep[i, i],
            )
            rows.append(("ht_single_class", single, single, 0.0))
        if config.batch is not None:
            rows.append(
                (
                    "pi_expanded_concentration",
                    est.pi_expanded_concentration(sample, table, config.batch),
                    "", "",
                )
            )
            finite = est.variance_ht_finite_batch(sample, table, dep, config.batch)
            rows.append(("variance_ht_finite_batch", finite, "", ""))
    if not rows and config.ckk_grid is None:
        raise ConfigError(
            "<root>", "estimate needs 'sample_counts', 'expected_counts' or 'ckk_grid'"
        )
    if rows:
        writer.write(
            "estimate.csv", ["estimator", "value", "gy_term", "correction_term"], rows
        )
    if config.ckk_grid is not None:
        n_k_values, ratios = config.ckk_grid
        grid_rows = []
        for n_k in n_k_values:
            for r in ratios:
                sol = est.solve_single_class_dependence(
                    est.EmpiricalVarianceInput(v_e=r, n_k=n_k), v_gy=1.0
                )
                grid_rows.append((n_k, r, sol.value, sol.infeasible))
        writer.write("ckk_grid.csv", ["n_k", "ratio", "c_kk", "infeasible"], grid_rows)
    return 0


def cmd_simulate(args) -> int:
    config = _load(args)
    writer = _Writer(_resolve_out_dir(args, config), config.config_hash, config.seed)
    table = config.table
    k = table.k
    if config.replicates is None:
        raise ConfigError("replicates", "simulate needs a replicate count")
    field = None
    if config.field is not None:
        field = generate_field(config.field, table, _stage_seed(config.seed, _FIELD_STREAM))
        save_field_csv(field, writer.out_dir / "field.csv", comment=writer.provenance)
    design = build_design(config, field)
    stats, estimate = run_replicates(
        design, table, config.replicates, _stage_seed(config.seed, _REPLICATE_STREAM)
    )
    dep = empirical_dependence(estimate)

    rep_rows = []
    for r in range(stats.replicates):
        rep_rows.append(
            (r, stats.mass[r], stats.cs[r], *[int(c) for c in stats.counts[r]])
        )
    writer.write(
        "replicates.csv",
        ["replicate", "M_s", "c_s"] + [f"N_{u}" for u in range(k)],
        rep_rows,
    )
    writer.write(
        "first_order.csv",
        ["i", "pi_i", "se"],
        [(u, estimate.pi1[u], estimate.pi1_se[u]) for u in range(k)],
    )
    pair_rows = []
    for u in range(k):
        for v in range(u, k):
            pair_rows.append(
                (
                    u, v, estimate.pi2[u, v], estimate.pi2_se[u, v],
                    dep.c_hat[u, v], dep.ci_lo[u, v], dep.ci_hi[u, v],
                )
            )
    writer.write(
        "estimates.csv", ["i", "j", "pi_ij", "se", "pc_hat", "ci_lo", "ci_hi"], pair_rows
    )
    report = compare_estimators(stats, estimate, table)
    writer.write(
        "comparison.csv",
        ["estimator", "dependence", "mode", "value", "v_e", "ratio", "z"],
        [
            (r.estimator, r.dependence, r.mode, r.value, r.v_e, r.ratio, r.z)
            for r in report.rows
        ],
    )
    writer.write(
        "summary.csv",
        ["key", "value"],
        [
            ("replicates", stats.replicates),
            ("v_e", stats.v_e),
            ("v_e_se", stats.v_e_se),
            ("mean_cs", stats.mean_cs),
            ("mass_cv", stats.mass_cv),
            ("n_empty", stats.n_empty),
            ("empty_fraction", stats.n_empty / stats.replicates),
        ],
    )
    return 0


def cmd_intercept(args) -> int:
    config = _load(args)
    writer = _Writer(_resolve_out_dir(args, config), config.config_hash, config.seed)
    table = config.table
    k = table.k
    if config.field is None:
        raise ConfigError("field", "intercept needs a 'field' section")
    if config.transects is None:
        raise ConfigError("transects", "intercept needs a 'transects' section")
    field = generate_field(config.field, table, _stage_seed(config.seed, _FIELD_STREAM))
    if field.n == 0:
        raise ConfigError("field", "generated field is empty; raise the intensity")
    save_field_csv(field, writer.out_dir / "field.csv", comment=writer.provenance)
    spec = config.transects
    records = cast_transects(
        field, spec.count, spec.orientation, spec.length,
        _stage_seed(config.seed, _TRANSECT_STREAM),
    )
    rec_rows = []
    for t, rec in enumerate(records):
        for order in range(rec.n):
            rec_rows.append(
                (
                    t, order, int(rec.particle_ids[order]), int(rec.class_ids[order]),
                    rec.chords[order], rec.widths[order],
                )
            )
    writer.write(
        "transects.csv",
        ["transect_id", "order", "particle_id", "class_id", "chord_length", "width"],
        rec_rows,
    )
    counts = transition_counts(records, k)
    writer.write(
        "counts.csv",
        ["class_id"] + [str(u) for u in range(k)],
        [(u, *[int(x) for x in counts.n[u]]) for u in range(k)],
    )
    fit = markov_fit(counts)
    writer.write(
        "markov.csv",
        ["class_id"] + [f"p_{u}" for u in range(k)] + ["stationary", "known", "irreducible"],
        [
            (u, *fit.transition[u], fit.stationary[u], bool(fit.known[u]), fit.irreducible)
            for u in range(k)
        ],
    )
    raw_freq = size_corrected_frequencies(records, k, correct=False)
    corrected_freq = size_corrected_frequencies(records, k, correct=True)
    writer.write(
        "frequencies.csv",
        ["class_id", "raw_frequency", "size_corrected_frequency"],
        [(u, raw_freq[u], corrected_freq[u]) for u in range(k)],
    )
    adjacency, _, _ = adjacency_dependence_for_field(
        field, table, spec, _stage_seed(config.seed, _TRANSECT_STREAM)
    )
    writer.write(
        "adjacency.csv",
        ["i", "j", "c_hat"],
        [(u, v, adjacency[u, v]) for u in range(k) for v in range(u, k)],
    )
    if config.calibration is not None:
        _write_calibration(writer, config, args.threads)
    return 0


def _write_calibration(writer: _Writer, config: ScenarioConfig, threads: int) -> None:
    from .scenario import _number_list  # shared low-level parser

    raw = config.calibration
    radii = _number_list(
        raw.get("cluster_radius", [0.10, 0.06, 0.03]), "calibration.cluster_radius"
    )
    n_seeds = int(raw.get("n_seeds", 10))
    replicates = int(raw.get("replicates", 100))
    window = raw.get("window", [0.05, 0.05])
    if config.field.variant != "matern_cluster":
        raise ConfigError("calibration", "calibration sweeps need a matern_cluster field")
    processes = [
        (f"cluster_radius={r:g}", replace(config.field, cluster_radius=r)) for r in radii
    ]
    report = calibrate_against_oracle(
        processes, config.table, (float(window[0]), float(window[1])),
        replicates, config.transects,
        master_seed=_stage_seed(config.seed, _CALIBRATE_STREAM),
        n_seeds=n_seeds, threads=threads,
    )
    k = config.table.k
    rows = []
    for case in report.cases:
        for u in range(k):
            for v in range(u, k):
                rows.append(
                    (case.label, u, v, case.oracle_c[u, v], case.adjacency_c[u, v])
                )
    writer.write(
        "calibration_cases.csv", ["case", "i", "j", "oracle_c", "adjacency_c"], rows
    )
    writer.write(
        "calibration_summary.csv",
        ["key", "value"],
        [
            ("spearman", report.spearman),
            ("sign_agreement", report.sign_agreement),
            ("null_regime", report.null_regime),
            *[(f"note_{i}", note) for i, note in enumerate(report.notes)],
        ],
    )


def cmd_table1(args) -> int:
    grid = est.dependence_grid()
    header = ["n_k"] + [format_sig(r, 6) for r in est.GRID_RATIO]
    print("single-class dependence solutions (rows: N_k, columns: V_e/V_GY)")
    print("  ".join(f"{h:>10}" for h in header))
    for a, n_k in enumerate(est.GRID_N_K):
        cells = [f"{n_k:>10}"] + [
            f"{round_sig(grid[a, b], 2):>10.1e}" for b in range(len(est.GRID_RATIO))
        ]
        print("  ".join(cells))
    if args.out or os.environ.get("GRANVAR_OUT"):
        writer = _Writer(_resolve_out_dir(args, None), "none", 0)
        rows = [
            (n_k, r, grid[a, b])
            for a, n_k in enumerate(est.GRID_N_K)
            for b, r in enumerate(est.GRID_RATIO)
        ]
        writer.write("table1.csv", ["n_k", "ratio", "c_kk"], rows)
    return 0


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else DEFAULT_VERIFY_SEED
    if args.config:
        config = load_scenario(args.config)
        if args.seed is None:
            seed = config.seed
    results = run_checks(seed=seed, quick=args.quick)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="granvar",
        description="Sampling-variance estimation for particulate materials "
        "with dependent particle selection",
    )
    parser.add_argument("--version", action="version", version=f"granvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", help="output directory (default: scenario out_dir, "
                                     "then $GRANVAR_OUT, then ./granvar_out)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for ensemble stages (output-invariant)")

    p_est = sub.add_parser("estimate", help="closed-form estimator report")
    common(p_est)
    p_est.set_defaults(fn=cmd_estimate)

    p_sim = sub.add_parser("simulate", help="replicate a selection design")
    common(p_sim)
    p_sim.set_defaults(fn=cmd_simulate)

    p_int = sub.add_parser("intercept", help="line-intercept sampling run")
    common(p_int)
    p_int.set_defaults(fn=cmd_intercept)

    p_tab = sub.add_parser("table1", help="single-class dependence solution grid")
    common(p_tab)
    p_tab.set_defaults(fn=cmd_table1)

    p_ver = sub.add_parser("verify", help="run built-in consistency checks")
    common(p_ver)
    p_ver.add_argument("--quick", action="store_true", help="fast subset of checks")
    p_ver.set_defaults(fn=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"granvar: configuration error: {exc}", file=sys.stderr)
        return 2
    except GranvarError as exc:
        print(f"granvar: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"granvar: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
