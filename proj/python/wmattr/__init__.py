# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The wmattr Authors
"""Attrition and outcome prediction for pediatric weight-management cohorts."""

import json

from ._wmattr import (
    ConfigError,
    Error,
    auprc,
    auroc,
    baseline_auprc,
    config_keys,
    exact_shap,
    fit_logistic,
    kernel_shap,
)
from . import _wmattr

__all__ = [
    "ConfigError",
    "Error",
    "auprc",
    "auroc",
    "baseline_auprc",
    "config_keys",
    "exact_shap",
    "fit_logistic",
    "generate_cohort",
    "kernel_shap",
    "resolve_config",
    "run",
    "run_id",
]


def run(command, config=None, **overrides):
    """Runs a pipeline stage and returns the run directory."""
    doc = dict(config or {})
    doc.update(overrides)
    return _wmattr.run(command, json.dumps(doc))


def resolve_config(config=None, **overrides):
    doc = dict(config or {})
    doc.update(overrides)
    return json.loads(_wmattr.resolve_config(json.dumps(doc)))


def run_id(config=None, **overrides):
    doc = dict(config or {})
    doc.update(overrides)
    return _wmattr.run_id(json.dumps(doc))


def generate_cohort(size, seed):
    """Returns (records, summary) for a synthetic cohort."""
    text, summary = _wmattr.generate_cohort(size, seed)
    records = [json.loads(line) for line in text.splitlines() if line]
    return records, json.loads(summary)
