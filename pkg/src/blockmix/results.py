"""Fit-result container, reproducible serialization, and restart mapping.

The on-disk format is JSON with two documented extensions of note:
floats are written with 17 significant digits so values round-trip
bit-exactly, and the tokens Infinity / -Infinity are permitted (the
degree-corrected model stores -inf log-rates for empty cells and
degree-zero nodes).  A schema_version field guards future changes.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from blockmix.models import BlockParams, GraphonStep, Partition

__all__ = ["FitResult", "to_json", "from_json", "map_restarts", "restart_stream"]

SCHEMA_VERSION = 1


@dataclass
class FitResult:
    """Everything a fitting engine reports.

    ``labels`` is the 1-based hard partition; ``node_labels`` carries the
    external node identifiers in index order; ``config`` echoes the
    engine configuration so the run can be reproduced bit-exactly.
    ``posterior`` is populated by the MCEM engine only.
    """

    engine: str
    kind: str
    K: int
    labels: np.ndarray
    node_labels: tuple[str, ...]
    params: BlockParams | GraphonStep
    objective: float
    trace: list[float]
    seed: int
    config: dict[str, Any]
    posterior: Any = None  # PosteriorSummary for the mcem engine
    extras: dict = field(default_factory=dict)  # runtime-only, never serialized

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.node_labels) != self.labels.size:
            raise ValueError("node_labels length must match the partition")

    @property
    def partition(self) -> Partition:
        return Partition(self.labels, self.K)


def _render(obj, indent: int) -> str:
    pad = " " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = ",\n".join(pad + "  " + _render(v, indent + 2) for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_render(v, indent + 2)}' for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _params_obj(params: BlockParams | GraphonStep) -> dict:
    if isinstance(params, GraphonStep):
        return {
            "kind": "bernoulli",
            "K": params.K,
            "pi": params.pi,
            "block_matrix": params.P,
            "gamma": None,
            "tau": params.tau,
        }
    return {
        "kind": params.kind,
        "K": params.K,
        "pi": params.pi,
        "block_matrix": params.block_matrix,
        "gamma": params.gamma,
        "tau": None,
    }


def _params_from_obj(obj: dict) -> BlockParams | GraphonStep:
    if obj.get("tau") is not None:
        return GraphonStep(np.array(obj["tau"]), np.array(obj["block_matrix"]))
    gamma = obj.get("gamma")
    return BlockParams(
        obj["kind"],
        int(obj["K"]),
        np.array(obj["pi"]),
        np.array(obj["block_matrix"]),
        gamma=None if gamma is None else np.array(gamma),
    )


def to_json(result: FitResult) -> str:
    """Serialize a fit result to deterministic JSON text."""
    posterior = None
    if result.posterior is not None:
        posterior = {"freq": result.posterior.freq, "gini": result.posterior.gini}
    obj = {
        "schema_version": SCHEMA_VERSION,
        "engine": result.engine,
        "model": result.kind,
        "K": result.K,
        "seed": result.seed,
        "config": result.config,
        "node_labels": list(result.node_labels),
        "partition": result.labels,
        "params": _params_obj(result.params),
        "objective": float(result.objective),
        "trace": [float(v) for v in result.trace],
        "posterior": posterior,
    }
    return _render(obj, 0) + "\n"


def from_json(text: str) -> FitResult:
    """Parse fit-result JSON back into a FitResult, without loss."""
    obj = json.loads(text)
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    posterior = None
    if obj.get("posterior") is not None:
        from blockmix.mcem import PosteriorSummary

        posterior = PosteriorSummary(
            np.array(obj["posterior"]["freq"], dtype=np.float64),
            np.array(obj["posterior"]["gini"], dtype=np.float64),
        )
    return FitResult(
        engine=obj["engine"],
        kind=obj["model"],
        K=int(obj["K"]),
        labels=np.array(obj["partition"], dtype=np.int64),
        node_labels=tuple(obj["node_labels"]),
        params=_params_from_obj(obj["params"]),
        objective=float(obj["objective"]),
        trace=[float(v) for v in obj["trace"]],
        seed=int(obj["seed"]),
        config=obj["config"],
        posterior=posterior,
    )


def restart_stream(seed: int, engine_id: int, restart: int) -> np.random.Generator:
    """Counter-based stream for one engine restart.

    Engine ids are namespaced away from the generator module's streams
    so fitting a network with the seed that sampled it never replays the
    same uniforms.
    """
    key = np.array([seed, (engine_id << 40) + restart], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def worker_count() -> int:
    """Restart parallelism; set BLOCKMIX_WORKERS to enable a process pool."""
    raw = os.environ.get("BLOCKMIX_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_restarts(fn: Callable, args: Sequence) -> list:
    """Apply fn to each restart argument, preserving input order.

    Runs serially unless BLOCKMIX_WORKERS exceeds 1.  Results are
    order-stable, so reductions over them are scheduling-independent.
    """
    workers = worker_count()
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
        return list(pool.map(fn, args))
