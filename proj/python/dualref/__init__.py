"""Dual-refinement unsupervised domain adaptation on feature vectors.

Config arguments are plain dicts whose keys match the JSON config file.
"""

import json

from . import _dualref
from ._dualref import (
    ConfigError,
    Encoder,
    IoError,
    NumericalError,
    dbscan,
    jaccard_distance,
    kmeans,
    pairwise_fscore,
    retrieval_eval,
)

__version__ = _dualref.__version__


def _cfg(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_dualref.default_config())


def validate_config(config):
    """Full config with defaults filled in; raises ConfigError naming the bad key."""
    return json.loads(_dualref.validate_config(_cfg(config)))


def generate_synthetic(ids=64, per_id=20, cameras=4, d_in=32, rank=8, spread=1.0, noise=0.35, cam_shift=0.25,
                       domain_shift=1.0, seed=0):
    return _dualref.generate_synthetic(ids, per_id, cameras, d_in, rank, spread, noise, cam_shift, domain_shift, seed)


def pretrain(source, config=None):
    """Returns (encoder, report) for a split dict with raw/identity/camera."""
    return _dualref.pretrain(source["raw"], source["identity"], source["camera"], _cfg(config))


def cluster(encoder, target_raw, config=None, truth=None):
    return _dualref.cluster(encoder, target_raw, _cfg(config), list(truth) if truth is not None else [])


def adapt(encoder, target_raw, config=None, truth=None, run_dir=None):
    """Returns (encoder, bank, per-epoch metrics)."""
    return _dualref.adapt(encoder, target_raw, _cfg(config), list(truth) if truth is not None else [], run_dir or "")


def evaluate(encoder, query, gallery):
    return _dualref.evaluate_retrieval(encoder, query["raw"], query["identity"], query["camera"], gallery["raw"],
                                       gallery["identity"], gallery["camera"])


def run_cli(*args):
    """Runs the command-line entry point in-process; returns (exit code, stdout, stderr)."""
    return _dualref.run_cli([str(a) for a in args])


__all__ = [
    "ConfigError", "Encoder", "IoError", "NumericalError", "adapt", "cluster", "dbscan", "default_config",
    "evaluate", "generate_synthetic", "jaccard_distance", "kmeans", "pairwise_fscore", "pretrain",
    "retrieval_eval", "run_cli", "validate_config",
]
