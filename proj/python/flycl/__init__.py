"""Sparse random projection with streaming ridge classification."""

import json

from ._flycl import (
    FlyclError,
    encode,
    gcv_select,
    projection_matrix,
    read_embeddings,
    solve_ridge,
    synth,
    top_k,
    write_embeddings,
)
from ._flycl import run_json as _run_json

__all__ = [
    "FlyclError",
    "encode",
    "gcv_select",
    "projection_matrix",
    "read_embeddings",
    "run",
    "solve_ridge",
    "synth",
    "top_k",
    "write_embeddings",
]


def run(config: dict) -> dict:
    """Class-incremental run from a config dict; returns the report as a dict."""
    return json.loads(_run_json(json.dumps(config)))
