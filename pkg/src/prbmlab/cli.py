"""Command line interface.

Subcommands: ``sample`` (ensemble statistics), ``gap`` (single-model
spectral gap), ``ratemat`` (population rate matrix), ``evolve``
(trajectory and relaxation fits), ``sweep`` (grid runs), ``classify``
(phase fit of a gap series) and ``report`` (aggregation, CSV summaries and
figures).  The default output directory comes from ``PRBMLAB_OUTDIR``
(falling back to the working directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import (ensembles, lindblad, rate_matrices, diagnostics, dynamics,
               sweep as sweep_mod, io as io_mod, plots)

ENV_OUTDIR = "PRBMLAB_OUTDIR"


def _outdir(args):
    out = args.out or os.environ.get(ENV_OUTDIR) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _add_common(p):
    p.add_argument("--seed", type=int, default=2024, help="base RNG seed")
    p.add_argument("--out", default=None,
                   help=f"output directory (default ${ENV_OUTDIR} or .)")
    p.add_argument("--dense-limit", type=int, default=lindblad.DEFAULT_DENSE_LIMIT,
                   help="largest N handled by dense superoperator solvers")


def _sample_model(args):
    h_spec = ensembles.EnsembleSpec(args.size, args.alpha_h, args.boundary,
                                    seed=sweep_mod.derive_seed(args.seed, "H"))
    l_seed = sweep_mod.derive_seed(args.seed, "L", 0)
    if args.jump_kind == "prbm":
        l_op = ensembles.sample_operator(
            ensembles.EnsembleSpec(args.size, args.alpha_l, args.boundary, seed=l_seed))
    elif args.jump_kind == "diagonal-prbm":
        l_op = ensembles.sample_diagonal_operator(args.size, "prbm-eigenvalues",
                                                  alpha=args.alpha_l, seed=l_seed)
    else:
        l_op = ensembles.sample_diagonal_operator(args.size, "fat-tail", seed=l_seed)
    h_op = ensembles.sample_operator(h_spec)
    return lindblad.LindbladModel(h_op.matrix, [(l_op.matrix, args.gamma)])


def cmd_sample(args):
    out = _outdir(args)
    all_eigs = []
    first = None
    for r in range(args.realizations):
        spec = ensembles.EnsembleSpec(args.size, args.alpha, args.boundary,
                                      seed=sweep_mod.derive_seed(args.seed, r))
        decomp = ensembles.spectrum(ensembles.sample_operator(spec))
        if first is None:
            first = decomp
        all_eigs.append(decomp.eigenvalues)
    pooled = np.concatenate(all_eigs)
    io_mod.write_histogram_csv(os.path.join(out, "histogram.csv"), pooled,
                               bins=args.bins)
    io_mod.write_spectrum_ipr_csv(os.path.join(out, "spectrum.csv"),
                                  first.eigenvalues, ensembles.vector_iprs(first))
    n_loc = ensembles.count_localized(first, args.ipr_threshold)
    print(f"alpha={args.alpha} boundary={args.boundary} N={args.size} "
          f"realizations={args.realizations}")
    print(f"spectrum std = {np.std(pooled)!r} (1/sqrt(2) = {1/np.sqrt(2)!r})")
    print(f"mean IPR (first sample) = {float(np.mean(ensembles.vector_iprs(first)))!r}")
    print(f"localized states (IPR > {args.ipr_threshold}) = {n_loc}")
    print(f"wrote {out}/histogram.csv, {out}/spectrum.csv")
    return 0


def cmd_gap(args):
    out = _outdir(args)
    model = _sample_model(args)
    if args.size <= args.dense_limit and args.method in ("auto", "dense"):
        spec = lindblad.full_spectrum(model, dense_limit=args.dense_limit)
        io_mod.write_complex_spectrum_csv(os.path.join(out, "spectrum.csv"),
                                          spec.eigenvalues)
    else:
        spec = lindblad.leading_modes(model, count=args.count, tol=args.tol,
                                      method="auto" if args.method == "dense"
                                      else args.method)
        io_mod.write_complex_spectrum_csv(os.path.join(out, "spectrum.csv"),
                                          spec.eigenvalues)
    mode = spec.slowest_mode
    if args.mode_basis == "position":
        basis = None
        labels = np.arange(args.size, dtype=float)
    elif args.mode_basis == "hamiltonian":
        basis = ensembles.spectrum(model.hamiltonian)
        labels = basis.eigenvalues
    else:
        basis = ensembles.spectrum(model.channels[0][0])
        labels = basis.eigenvalues
    diag = np.real(diagnostics.population_components(mode, basis))
    io_mod.write_csv(os.path.join(out, "mode_populations.csv"),
                     ["index", "basis_label", "component"],
                     ((i, labels[i], diag[i]) for i in range(args.size)))
    io_mod.write_mode_json(os.path.join(out, "mode.json"), mode)
    print(f"method = {spec.method}")
    print(f"gap = {spec.gap!r}")
    for lam, _ in spec.leading:
        print(f"leading eigenvalue: {lam!r}")
    print(f"wrote {out}/spectrum.csv, {out}/mode_populations.csv, {out}/mode.json")
    return 0


def cmd_ratemat(args):
    out = _outdir(args)
    model = _sample_model(args)
    h_mat = model.hamiltonian
    l_mat = model.channels[0][0]
    if args.regime == "weak":
        rm = rate_matrices.weak_rate_matrix(ensembles.spectrum(h_mat), l_mat,
                                            args.gamma)
    elif args.regime in ("strong", "strong-unregularized"):
        rm = rate_matrices.strong_rate_matrix(ensembles.spectrum(l_mat), h_mat,
                                              args.gamma,
                                              regularized=args.regime == "strong")
    elif args.regime == "mean-field":
        rm = rate_matrices.mean_field_a0(args.size, args.alpha_l, args.gamma,
                                         args.boundary)
    else:
        rm = rate_matrices.localized_limit_a0(l_mat, args.gamma)
    gap, vec = rate_matrices.rate_gap(rm, dense_limit=max(args.size,
                                                          rate_matrices.DEFAULT_DENSE_LIMIT))
    io_mod.write_rate_matrix(os.path.join(out, "ratemat.csv"),
                             os.path.join(out, "ratemat.json"), rm)
    print(f"regime = {rm.regime}, N = {rm.size}, gamma = {rm.gamma!r}")
    print(f"rate gap = {gap!r}")
    print(f"slowest vector IPR = {float(np.sum(vec ** 4))!r}")
    print(f"wrote {out}/ratemat.csv, {out}/ratemat.json")
    return 0


def cmd_evolve(args):
    out = _outdir(args)
    model = _sample_model(args)
    if args.size <= args.dense_limit:
        spec = lindblad.full_spectrum(model, dense_limit=args.dense_limit)
    else:
        spec = lindblad.leading_modes(model, count=1, tol=args.tol)
    gap = spec.gap
    windows = tuple(tuple(float(x) for x in w.split(":")) for w in args.windows.split(","))
    t_max = max(hi for _, hi in windows) / gap
    times = np.linspace(0.0, t_max, args.points)
    traj = dynamics.evolve(model, dynamics.initial_state_hole(args.size), times,
                           dense_limit=args.dense_limit, gap=gap)
    report = dynamics.relaxation_report(traj, gap, windows)
    io_mod.write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj)
    io_mod.write_relaxation_csv(os.path.join(out, "relaxation.csv"), report)
    if args.plot:
        plots.render_trajectory(traj, out)
    print(f"gap = {gap!r} ({spec.method}); evolved to t = {t_max!r}")
    for window, agg in report.summary.items():
        print(f"window {window[0]:g}-{window[1]:g}/Delta: "
              f"mean rel diff = {agg['mean_rel_diff']!r}, "
              f"std = {agg['std_rel_diff']!r}, sites fitted = {agg['n_fitted']}")
    print(f"wrote {out}/trajectory.csv, {out}/relaxation.csv")
    return 0


def cmd_sweep(args):
    out = _outdir(args)
    config = sweep_mod.SweepConfig.from_json(args.config)
    if args.seed is not None:
        config.base_seed = args.seed
    done = {"n": 0}

    def progress(n):
        if n - done["n"] >= args.progress_every:
            done["n"] = n
            print(f"  {n} records", file=sys.stderr)

    records = sweep_mod.run_sweep(config, out, resume=args.resume,
                                  threads=args.threads, progress=progress)
    rows = sweep_mod.aggregate(records)
    io_mod.write_summary_csv(os.path.join(out, sweep_mod.SUMMARY_NAME), rows)
    print(f"{len(records)} records, {len(rows)} summary rows -> {out}")
    return 0


def cmd_classify(args):
    series = []
    with open(args.input) as fh:
        for row in csv.DictReader(fh):
            series.append((float(row["size"]), float(row["mean"]),
                           float(row.get("std", 0.0) or 0.0)))
    fit = diagnostics.classify_phase(series)
    print(json.dumps({"label": fit.label, "parameters": fit.parameters,
                      "residuals": fit.residuals, "residual_ratio": fit.ratio},
                     indent=2, sort_keys=True))
    return 0


def cmd_report(args):
    out = _outdir(args)
    records_path = args.records
    if os.path.isdir(records_path):
        records_path = os.path.join(records_path, sweep_mod.RECORDS_NAME)
    records = sweep_mod.load_records(records_path)
    rows = sweep_mod.aggregate(records)
    summary_path = os.path.join(out, sweep_mod.SUMMARY_NAME)
    io_mod.write_summary_csv(summary_path, rows)
    written = [summary_path]
    if not args.no_figures:
        written += plots.render_gap_vs_size(rows, out)
        written += plots.render_phase_diagrams(rows, out)
        written += plots.render_relaxation_windows(rows, out)
    print(f"{len(records)} records aggregated into {len(rows)} rows")
    for path in written:
        print(f"wrote {path}")
    return 0


def _model_args(p):
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--alpha-h", type=float, default=0.0)
    p.add_argument("--alpha-l", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--boundary", choices=[ensembles.OPEN, ensembles.PERIODIC],
                   default=ensembles.OPEN)
    p.add_argument("--jump-kind", choices=["prbm", "diagonal-prbm", "fat-tail"],
                   default="prbm")


def build_parser():
    parser = argparse.ArgumentParser(prog="prbmlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="ensemble statistics of one operator family")
    _add_common(p)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--boundary", choices=[ensembles.OPEN, ensembles.PERIODIC],
                   default=ensembles.OPEN)
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--bins", type=int, default=101)
    p.add_argument("--ipr-threshold", type=float, default=0.1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("gap", help="spectral gap of one sampled model")
    _add_common(p)
    _model_args(p)
    p.add_argument("--method", choices=["auto", "dense", "split", "shifted"],
                   default="auto")
    p.add_argument("--count", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--mode-basis", choices=["position", "hamiltonian", "jump"],
                   default="jump")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("ratemat", help="build and diagonalize a rate matrix")
    _add_common(p)
    _model_args(p)
    p.add_argument("--regime", choices=["weak", "strong", "strong-unregularized",
                                        "mean-field", "localized"],
                   default="weak")
    p.set_defaults(func=cmd_ratemat)

    p = sub.add_parser("evolve", help="relaxation of the hole initial state")
    _add_common(p)
    _model_args(p)
    p.add_argument("--windows", default="3:6,6:9,9:12",
                   help="fit windows in units of 1/gap, e.g. 3:6,6:9")
    p.add_argument("--points", type=int, default=97)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config base seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--progress-every", type=int, default=50)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("classify", help="phase fit of a gap-versus-size series")
    p.add_argument("--input", required=True,
                   help="CSV with columns size, mean[, std]")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="aggregate records, write CSV and figures")
    p.add_argument("--records", required=True,
                   help="records.jsonl file or the directory holding it")
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
