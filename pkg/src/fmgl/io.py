"""File formats: dense CSV covariances, Matrix Market precision outputs,
JSON reports and run manifests.

Floats are serialized with 17 significant digits, so every format
round-trips float64 values exactly.  Precision matrices are written one
file per graph in symmetric coordinate Matrix Market form (1-based
indices); covariances and raw data are dense CSV.
"""

import datetime
import importlib.metadata
import json
import os

import numpy as np
import scipy
import scipy.io
import scipy.sparse

from .core import CovarianceSet, as_stack
from .errors import DataError

SCHEMA_VERSION = 1

COV_PATTERN = "cov_{k}.csv"
PRECISION_PATTERN = "precision_{k}.mtx"
TRUTH_PATTERN = "theta_true_{k}.mtx"


def write_dense_csv(path, matrix):
    np.savetxt(path, np.asarray(matrix, dtype=float), fmt="%.17g",
               delimiter=",")


def read_dense_csv(path):
    if not os.path.exists(path):
        raise DataError("no such file: %s" % path)
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DataError("cannot parse %s: %s" % (path, exc))
    return arr


def write_matrix_market(path, matrix):
    """Sparse symmetric coordinate output (explicit zeros dropped)."""
    coo = scipy.sparse.coo_matrix(np.asarray(matrix, dtype=float))
    scipy.io.mmwrite(path, coo, precision=17, symmetry="symmetric")


def read_matrix_market(path):
    if not os.path.exists(path):
        raise DataError("no such file: %s" % path)
    try:
        mat = scipy.io.mmread(path)
    except Exception as exc:
        raise DataError("cannot parse %s: %s" % (path, exc))
    if scipy.sparse.issparse(mat):
        mat = mat.toarray()
    return np.asarray(mat, dtype=float)


def save_covariances(s, out_dir):
    paths = []
    arr = as_stack(s)
    for k in range(arr.shape[0]):
        path = os.path.join(out_dir, COV_PATTERN.format(k=k + 1))
        write_dense_csv(path, arr[k])
        paths.append(path)
    return paths


def load_covariances(paths, n_samples=None):
    """Stack per-graph covariance CSV files into a CovarianceSet."""
    mats = [read_dense_csv(p) for p in paths]
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise DataError("covariance files have differing shapes: %s"
                        % sorted(shapes))
    return CovarianceSet(np.stack(mats), n_samples=n_samples)


def covariance_from_samples(x, center=False):
    """S = X^T X / n from an n x p sample matrix (optionally centered)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DataError("raw data must be a 2-D samples-by-features array")
    if center:
        x = x - x.mean(axis=0, keepdims=True)
    n = x.shape[0]
    return x.T @ x / n


def load_raw_data(paths, center=False):
    """Per-group raw sample CSVs (rows = samples) -> CovarianceSet."""
    mats = []
    n_min = None
    for p in paths:
        x = read_dense_csv(p)
        mats.append(covariance_from_samples(x, center=center))
        n_min = x.shape[0] if n_min is None else min(n_min, x.shape[0])
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise DataError("raw data files have differing feature counts")
    return CovarianceSet(np.stack(mats), n_samples=n_min)


def save_precisions(theta, out_dir, pattern=PRECISION_PATTERN):
    paths = []
    arr = as_stack(theta)
    for k in range(arr.shape[0]):
        path = os.path.join(out_dir, pattern.format(k=k + 1))
        write_matrix_market(path, arr[k])
        paths.append(path)
    return paths


def load_precisions(paths):
    mats = [read_matrix_market(p) for p in paths]
    shapes = {m.shape for m in mats}
    if len(shapes) != 1:
        raise DataError("precision files have differing shapes")
    return np.stack(mats)


def matrix_paths(directory, pattern):
    """Existing per-graph files matching the pattern, in k order."""
    paths = []
    k = 1
    while True:
        path = os.path.join(directory, pattern.format(k=k))
        if not os.path.exists(path):
            break
        paths.append(path)
        k += 1
    if not paths:
        raise DataError("no files matching %s in %s" % (pattern, directory))
    return paths


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    if not os.path.exists(path):
        raise DataError("no such file: %s" % path)
    with open(path) as fh:
        return json.load(fh)


def _package_version():
    try:
        return importlib.metadata.version("fmgl")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out_dir, command, argv, parameters, inputs=(), outputs=()):
    """Reproducibility record written alongside every command's outputs.

    argv is the full argument vector of the run, so the directory can be
    regenerated from the manifest alone.
    """
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "argv": list(argv),
        "parameters": parameters,
        "inputs": [os.path.abspath(p) for p in inputs],
        "outputs": [os.path.abspath(p) for p in outputs],
        "versions": {
            "fmgl": _package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, payload)
    return path
