"""Zero-shot fallacy classification harness."""

import os
from pathlib import Path

_packaged_data = Path(__file__).with_name("data")
if _packaged_data.is_dir() and not os.environ.get("FALLACY_DATA_DIR"):
    os.environ["FALLACY_DATA_DIR"] = str(_packaged_data)

from ._core import (  # noqa: E402
    CacheMissError,
    ConfigError,
    ContractViolation,
    FallacyError,
    IngestionError,
    RunAborted,
    SchemaError,
    TemplateError,
    TransportError,
    __version__,
    datasets,
    default_data_dir,
    evaluate,
    label_space,
    load_dataset,
    normalize_label,
    parse_reply,
    rank_schemes,
    render_prompts,
    request_digest,
    round_count,
    run_experiment,
    run_sweep,
    schemes,
)

__all__ = [
    "CacheMissError",
    "ConfigError",
    "ContractViolation",
    "FallacyError",
    "IngestionError",
    "RunAborted",
    "SchemaError",
    "TemplateError",
    "TransportError",
    "__version__",
    "datasets",
    "default_data_dir",
    "evaluate",
    "label_space",
    "load_dataset",
    "normalize_label",
    "parse_reply",
    "rank_schemes",
    "render_prompts",
    "request_digest",
    "round_count",
    "run_experiment",
    "run_sweep",
    "schemes",
]
