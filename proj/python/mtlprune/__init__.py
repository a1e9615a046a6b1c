"""Multi-task CNN training and structured filter pruning.

Configs are plain dicts (or JSON files); commands return the directory they wrote.
"""

import json
import os

from ._mtlprune import (
    Config,
    ConfigError,
    Error,
    IoError,
    PruneError,
    ShapeError,
    depth_metrics,
    evaluate,
    gen_data,
    generate_sample,
    load_config,
    metric_columns,
    normal_metrics,
    parse_config,
    percent_delta,
    prune,
    report,
    retrain,
    score_cosprune,
    seg_metrics,
    selftest,
    train,
)


def config(doc=None, **overrides):
    """Build a validated Config from a dict; keyword arguments override top-level keys.

    Honours the output-root environment variable like the command-line tool does.
    """
    doc = dict(doc or {})
    doc.update(overrides)
    root = os.environ.get("MTLPRUNE_OUTPUT_ROOT")
    if root:
        doc["output_dir"] = root
    return parse_config(json.dumps(doc))

__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "IoError",
    "PruneError",
    "ShapeError",
    "config",
    "depth_metrics",
    "evaluate",
    "gen_data",
    "generate_sample",
    "load_config",
    "metric_columns",
    "normal_metrics",
    "parse_config",
    "percent_delta",
    "prune",
    "report",
    "retrain",
    "score_cosprune",
    "seg_metrics",
    "selftest",
    "train",
]
