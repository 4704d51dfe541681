"""Uniform information density toolkit.

Thin Python layer over the C++ core: corpora, the Kneser-Ney n-gram model,
UID metrics, effort-model checks, regression and the experiment sweeps.
"""

import json as _json

from ._uidkit import (
    ConvergenceError,
    Corpus,
    DomainError,
    Error,
    InputError,
    NGramModel,
    correlate,
    delta_loglik,
    effort,
    entropy_uid,
    fit,
    global_delta,
    load_surprisals,
    local_delta,
    local_variance,
    max_surprisal,
    optimal_length,
    paired_ttest,
    super_linear,
    surprisal_tsv,
    variance,
    verify_uniform_minimizer,
    word_variances,
)
from . import _uidkit

CONFIG_SCHEMA_VERSION = 1


def theory_check(seed=1, draws=100, trials=1000):
    """Randomized checks of the uniform-minimizer and optimal-length results."""
    return _json.loads(_uidkit._theory_check(seed, draws, trials))


def _config_text(config):
    config = dict(config)
    config.setdefault("schema_version", CONFIG_SCHEMA_VERSION)
    return _json.dumps(config)


def config_hash(config):
    return _uidkit._config_hash(_config_text(config))


def run(kind, config):
    """Run one of 'sweep-k', 'table', 'sweep-window', 'correlate' on a config dict."""
    return _json.loads(_uidkit._run_report(_config_text(config), kind))


__all__ = [name for name in dir() if not name.startswith("_")]
