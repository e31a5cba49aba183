"""Delimited-text and JSON export helpers.

All floats are written with ``repr`` (shortest round-trip form) so that
identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json

import numpy as np


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_summary_csv(path, rows):
    header = ["alpha_h", "alpha_l", "gamma", "size", "task", "metric",
              "mean", "std", "count"]
    write_csv(path, header, ([r[k] for k in header] for r in rows))


def write_histogram_csv(path, values, bins=101):
    counts, edges = np.histogram(values, bins=bins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    write_csv(path, ["value", "count"], zip(centers, counts))


def write_spectrum_ipr_csv(path, eigenvalues, iprs):
    write_csv(path, ["index", "eigenvalue", "ipr"],
              ((i, ev, q) for i, (ev, q) in enumerate(zip(eigenvalues, iprs))))


def write_complex_spectrum_csv(path, eigenvalues):
    write_csv(path, ["re_lambda", "im_lambda"],
              ((np.real(z), np.imag(z)) for z in eigenvalues))


def write_mode_json(path, mode):
    """Full mode matrix in a JSON container with a shape header."""
    mode = np.asarray(mode)
    payload = {"shape": list(mode.shape),
               "re": np.real(mode).tolist(),
               "im": np.imag(mode).tolist()}
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def read_mode_json(path):
    with open(path) as fh:
        payload = json.load(fh)
    return (np.asarray(payload["re"]) + 1j * np.asarray(payload["im"])).reshape(
        payload["shape"])


def write_rate_matrix(csv_path, json_path, rm):
    """Sparse triplet export plus a JSON header with the matrix metadata."""
    n = rm.size
    rows = ((i, j, rm.matrix[i, j]) for i in range(n) for j in range(n)
            if rm.matrix[i, j] != 0.0)
    write_csv(csv_path, ["i", "j", "a_ij"], rows)
    header = {"regime": rm.regime, "gamma": rm.gamma, "size": n,
              "basis_labels": [float(x) for x in rm.basis_labels]}
    header.update({k: v for k, v in rm.notes.items()})
    with open(json_path, "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trajectory_csv(path, traj):
    n = traj.site_populations.shape[1]
    rows = ((t, site, traj.site_populations[k, site])
            for k, t in enumerate(traj.times) for site in range(n))
    write_csv(path, ["t", "site", "rho_ii"], rows)


def write_relaxation_csv(path, report):
    rows = ((row["site"], row["window"][0], row["window"][1], row["rate"],
             row["rel_diff"], row["note"]) for row in report.rows)
    write_csv(path, ["site", "window_lo", "window_hi", "rate", "rel_diff", "note"],
              rows)
