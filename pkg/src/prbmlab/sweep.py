"""Seeded ensemble sweeps over (alpha_H, alpha_L, gamma, N).

Each (grid point, realization) job derives its seed from a stable 64-bit
hash of the base seed, the grid indices and the realization index, so
results are bit-reproducible regardless of worker count or completion
order.  Completed records append to a newline-delimited JSON file (crash
safe, resumable); successful runs finish by rewriting the record file in
canonical sorted order so identical configs produce identical files.
Wall-clock timings go to a separate run log that is not part of the
deterministic payload.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
import time
from dataclasses import dataclass, field, asdict
from itertools import product

import numpy as np

from . import ensembles, lindblad, rate_matrices, diagnostics, dynamics

TASKS = ("lindblad-gap", "rate-gap-weak", "rate-gap-strong", "diagnostics", "dynamics")

RECORDS_NAME = "records.jsonl"
RUNLOG_NAME = "runlog.jsonl"
SUMMARY_NAME = "summary.csv"


@dataclass
class ChannelSpec:
    """One decoherence channel of a sweep model.

    ``alpha=None`` means "use the swept alpha_L of the grid point"; the
    channel strength is ``gamma * strength_factor``.
    """

    kind: str = "prbm"            # prbm | diagonal-prbm | fat-tail
    alpha: float = None
    strength_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("prbm", "diagonal-prbm", "fat-tail"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.strength_factor < 0:
            raise ValueError("strength factor must be >= 0")


@dataclass
class SweepConfig:
    alpha_h: list
    alpha_l: list
    gamma: list
    sizes: list
    realizations: int = 100
    base_seed: int = 2024
    tasks: tuple = ("rate-gap-weak",)
    channels: list = field(default_factory=lambda: [ChannelSpec()])
    boundary: str = ensembles.OPEN
    dense_limit: int = lindblad.DEFAULT_DENSE_LIMIT
    power_limit: int = 1600
    rate_dense_limit: int = rate_matrices.DEFAULT_DENSE_LIMIT
    power_tol: float = 1e-7
    windows: tuple = dynamics.DEFAULT_WINDOWS

    def __post_init__(self):
        for name in ("alpha_h", "alpha_l", "gamma", "sizes"):
            if not list(getattr(self, name)):
                raise ValueError(f"grid {name} must not be empty")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        for task in self.tasks:
            if task not in TASKS:
                raise ValueError(f"unknown task {task!r}")
        self.channels = [c if isinstance(c, ChannelSpec) else ChannelSpec(**c)
                         for c in self.channels]
        if not self.channels:
            raise ValueError("need at least one channel")
        nmax = max(self.sizes)
        gates = {"lindblad-gap": self.power_limit, "diagnostics": self.power_limit,
                 "dynamics": self.power_limit, "rate-gap-weak": self.rate_dense_limit,
                 "rate-gap-strong": self.rate_dense_limit}
        for task in self.tasks:
            if nmax > gates[task]:
                raise ValueError(
                    f"size {nmax} exceeds the {task} gate {gates[task]}")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        raw.pop("comment", None)
        if "windows" in raw:
            raw["windows"] = tuple(tuple(w) for w in raw["windows"])
        if "tasks" in raw:
            raw["tasks"] = tuple(raw["tasks"])
        return cls(**raw)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def points(self):
        grids = (self.alpha_h, self.alpha_l, self.gamma, self.sizes)
        for idx in product(*(range(len(g)) for g in grids)):
            yield idx, tuple(g[i] for g, i in zip(grids, idx))


def derive_seed(base_seed: int, *parts) -> int:
    """Stable 64-bit seed from the base seed and arbitrary index parts."""
    digest = hashlib.blake2b(repr((int(base_seed),) + tuple(parts)).encode(),
                             digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _build_operators(point, config, seed):
    alpha_h, alpha_l, gamma, size = point
    h_op = ensembles.sample_operator(ensembles.EnsembleSpec(
        size, alpha_h, config.boundary, seed=derive_seed(seed, "H")))
    channels = []
    for k, chan in enumerate(config.channels):
        alpha = alpha_l if chan.alpha is None else chan.alpha
        cseed = derive_seed(seed, "L", k)
        if chan.kind == "prbm":
            op = ensembles.sample_operator(
                ensembles.EnsembleSpec(size, alpha, config.boundary, seed=cseed))
        elif chan.kind == "diagonal-prbm":
            op = ensembles.sample_diagonal_operator(
                size, "prbm-eigenvalues", alpha=alpha, seed=cseed)
        else:
            op = ensembles.sample_diagonal_operator(size, "fat-tail", seed=cseed)
        channels.append((op.matrix, gamma * chan.strength_factor))
    return h_op.matrix, channels


def _lindblad_spectrum(model, config):
    if model.dim <= config.dense_limit:
        return lindblad.full_spectrum(model, dense_limit=config.dense_limit)
    return lindblad.leading_modes(model, count=2, tol=config.power_tol)


def run_realization(point, config: SweepConfig, seed: int, tasks=None) -> dict:
    """All requested task metrics for one (point, realization) job."""
    tasks = tuple(tasks if tasks is not None else config.tasks)
    alpha_h, alpha_l, gamma, size = point
    h_mat, channels = _build_operators(point, config, seed)
    out = {}
    spec_cache = {}

    def lind_spec():
        if "spec" not in spec_cache:
            model = lindblad.LindbladModel(h_mat, channels)
            spec_cache["spec"] = _lindblad_spectrum(model, config)
        return spec_cache["spec"]

    def h_decomp():
        if "h" not in spec_cache:
            spec_cache["h"] = ensembles.spectrum(h_mat)
        return spec_cache["h"]

    def l_decomp():
        if "l" not in spec_cache:
            spec_cache["l"] = ensembles.spectrum(channels[0][0])
        return spec_cache["l"]

    for task in tasks:
        if task == "lindblad-gap":
            sp = lind_spec()
            lam1 = sp.leading[0][0] if sp.leading else complex(-sp.gap)
            out[task] = {"gap": sp.gap, "lambda1_re": float(np.real(lam1)),
                         "lambda1_im": float(np.imag(lam1)), "method": sp.method}
        elif task == "rate-gap-weak":
            rm = rate_matrices.multi_channel_rate_matrix(
                lindblad.LindbladModel(h_mat, channels), rate_matrices.WEAK) \
                if len(channels) > 1 else \
                rate_matrices.weak_rate_matrix(h_decomp(), channels[0][0],
                                               channels[0][1])
            gap, vec = rate_matrices.rate_gap(rm, dense_limit=config.rate_dense_limit)
            out[task] = {"gap": gap, "vector_ipr": float(np.sum(vec ** 4))}
        elif task == "rate-gap-strong":
            if len(channels) > 1:
                rm = rate_matrices.multi_channel_rate_matrix(
                    lindblad.LindbladModel(h_mat, channels),
                    "strong-about-channel-1")
            else:
                rm = rate_matrices.strong_rate_matrix(l_decomp(), h_mat,
                                                      channels[0][1])
            gap, vec = rate_matrices.rate_gap(rm, dense_limit=config.rate_dense_limit)
            est, s_stat, filtered = rate_matrices.tail_gap_estimate(
                l_decomp(), channels[0][1])
            out[task] = {"gap": gap, "vector_ipr": float(np.sum(vec ** 4)),
                         "tail_estimate": est, "s_statistic": s_stat,
                         "s_filtered": bool(filtered)}
        elif task == "diagnostics":
            sp = lind_spec()
            mode = sp.slowest_mode
            out[task] = {
                "overlap_h": diagnostics.population_overlap(mode, h_decomp()),
                "overlap_l": diagnostics.population_overlap(mode, l_decomp()),
                "overlap_x": diagnostics.population_overlap(mode),
                "ipr_h": diagnostics.ipr_population(mode, h_decomp()),
                "ipr_l": diagnostics.ipr_population(mode, l_decomp()),
                "ipr_x": diagnostics.ipr_real_space(mode, h_decomp()),
            }
        elif task == "dynamics":
            sp = lind_spec()
            gap = sp.gap
            t_max = max(hi for _, hi in config.windows) / gap
            times = np.linspace(0.0, t_max, 97)
            model = lindblad.LindbladModel(h_mat, channels)
            traj = dynamics.evolve(model, dynamics.initial_state_hole(size),
                                   times, dense_limit=config.dense_limit, gap=gap)
            report = dynamics.relaxation_report(traj, gap, config.windows)
            metrics = {"gap": gap}
            for (lo, hi), agg in report.summary.items():
                key = f"w{lo:g}_{hi:g}"
                metrics[key + "_mean"] = agg["mean_rel_diff"]
                metrics[key + "_std"] = agg["std_rel_diff"]
                metrics[key + "_n"] = agg["n_fitted"]
            out[task] = metrics
    return out


def _job(args):
    point_idx, point, realization, config = args
    seed = derive_seed(config.base_seed, *point_idx, realization)
    t0 = time.perf_counter()
    records = []
    failures = []
    try:
        results = run_realization(point, config, seed)
        for task, metrics in results.items():
            rec = {"alpha_h": point[0], "alpha_l": point[1], "gamma": point[2],
                   "size": point[3], "realization": realization, "seed": seed,
                   "task": task}
            rec.update(metrics)
            records.append(rec)
    except Exception as err:  # per-job failures recorded, sweep continues
        failures.append({"point": list(point), "realization": realization,
                         "seed": seed, "error": f"{type(err).__name__}: {err}"})
    wall = time.perf_counter() - t0
    return records, failures, wall, point_idx, realization


def _record_key(rec):
    return (rec["alpha_h"], rec["alpha_l"], rec["gamma"], rec["size"],
            rec["realization"], rec["task"])


def _dump(rec):
    return json.dumps(rec, sort_keys=True)


def load_records(path):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def run_sweep(config: SweepConfig, out_dir, resume: bool = False,
              threads: int = 1, progress=None):
    """Execute all (point x realization) jobs and persist the results.

    Returns the list of records (including previously completed ones when
    resuming).  Failed jobs are logged in the run log and skipped in the
    record file; the sweep continues.
    """
    os.makedirs(out_dir, exist_ok=True)
    records_path = os.path.join(out_dir, RECORDS_NAME)
    runlog_path = os.path.join(out_dir, RUNLOG_NAME)

    done = set()
    existing = []
    if resume and os.path.exists(records_path):
        existing = load_records(records_path)
        for rec in existing:
            done.add(_record_key(rec))
    elif os.path.exists(records_path) and not resume:
        os.remove(records_path)

    jobs = []
    for point_idx, point in config.points():
        for r in range(config.realizations):
            needed = [t for t in config.tasks
                      if (point[0], point[1], point[2], point[3], r, t) not in done]
            if needed:
                jobs.append((point_idx, point, r, config))

    new_records = []
    with open(records_path, "a") as rec_fh, open(runlog_path, "a") as log_fh:
        def consume(result):
            records, failures, wall, point_idx, realization = result
            for rec in records:
                if _record_key(rec) in done:
                    continue
                rec_fh.write(_dump(rec) + "\n")
                new_records.append(rec)
            rec_fh.flush()
            log_fh.write(_dump({"point_index": list(point_idx),
                                "realization": realization,
                                "wall_time": wall,
                                "failures": failures}) + "\n")
            log_fh.flush()
            if progress:
                progress(len(new_records))

        if threads > 1 and len(jobs) > 1:
            with multiprocessing.Pool(threads) as pool:
                for result in pool.imap_unordered(_job, jobs):
                    consume(result)
        else:
            for job in jobs:
                consume(_job(job))

    all_records = existing + new_records
    all_records.sort(key=_record_key)
    with open(records_path, "w") as fh:
        for rec in all_records:
            fh.write(_dump(rec) + "\n")
    return all_records


def aggregate(records):
    """Per-point mean/std/count rows for every numeric metric.

    Population convention for the standard deviation.  Rejects records
    whose point schema differs.
    """
    point_keys = ("alpha_h", "alpha_l", "gamma", "size", "task")
    skip = set(point_keys) | {"realization", "seed"}
    groups = {}
    for rec in records:
        if any(k not in rec for k in point_keys):
            raise ValueError("record is missing point fields")
        key = tuple(rec[k] for k in point_keys)
        groups.setdefault(key, []).append(rec)
    by_task = {}
    for rec in records:
        sch = frozenset(rec.keys()) - skip
        prev = by_task.setdefault(rec["task"], sch)
        if prev != sch:
            raise ValueError(f"mixed schemas for task {rec['task']!r}")
    rows = []
    for key in sorted(groups):
        recs = groups[key]
        metrics = sorted(frozenset(recs[0].keys()) - skip)
        for metric in metrics:
            vals = [r[metric] for r in recs]
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in vals):
                continue
            arr = np.asarray(vals, dtype=float)
            rows.append(dict(zip(point_keys, key))
                        | {"metric": metric, "mean": float(np.mean(arr)),
                           "std": float(np.std(arr)), "count": len(arr)})
    return rows
