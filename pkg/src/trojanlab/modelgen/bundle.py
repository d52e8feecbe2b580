"""Bundle I/O: one trained model as a single reproducible file.

A bundle is a STORED zip holding meta.json (version, config, stats) and
weights.bin (the engine's binary weight container). Member order and
timestamps are pinned, so identical training runs serialize to identical
bytes.
"""

from __future__ import annotations

import io
import json
import os
import zipfile
from pathlib import Path
from typing import Union

import numpy as np

from ..engine import (
    CorruptWeightsError,
    Sequential,
    WeightsVersionError,
    read_weights,
    write_weights,
)
from ..engine.tensor import ShapeError
from .arch import architecture_info
from .runner import (
    ModelgenError,
    TrainedModelBundle,
    config_from_dict,
    config_to_dict,
    stats_from_dict,
    stats_to_dict,
)

BUNDLE_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed zip timestamp, oldest the format allows


class BundleError(ModelgenError):
    pass


class BundleVersionError(BundleError):
    pass


def save_bundle(bundle: TrainedModelBundle, path: Union[str, os.PathLike]) -> None:
    """Write atomically: temp file in place, then rename."""
    meta = {
        "bundle_version": BUNDLE_VERSION,
        "architecture": bundle.architecture,
        "model_index": bundle.model_index,
        "config": config_to_dict(bundle.config),
        "statistics": stats_to_dict(bundle.statistics),
    }
    weights_buf = io.BytesIO()
    write_weights(weights_buf, bundle.architecture, list(bundle.weights))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr(
            zipfile.ZipInfo("meta.json", date_time=_EPOCH),
            json.dumps(meta, sort_keys=True, indent=2),
        )
        zf.writestr(zipfile.ZipInfo("weights.bin", date_time=_EPOCH), weights_buf.getvalue())
    os.replace(tmp, path)


def load_bundle(path: Union[str, os.PathLike]) -> TrainedModelBundle:
    """Read a bundle back, verifying version, architecture, and shapes."""
    path = Path(path)
    if not path.exists():
        raise BundleError(f"no such bundle: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            weights_blob = zf.read("weights.bin")
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise BundleError(f"corrupt bundle {path}: {exc}")
    version = meta.get("bundle_version")
    if version != BUNDLE_VERSION:
        raise BundleVersionError(
            f"bundle version {version}, this reader supports {BUNDLE_VERSION}"
        )
    arch = meta["architecture"]
    architecture_info(arch)  # unknown id fails here, before any decode
    try:
        stored_arch, named = read_weights(weights_blob)
    except (CorruptWeightsError, WeightsVersionError) as exc:
        raise BundleError(f"corrupt bundle {path}: {exc}")
    if stored_arch != arch:
        raise BundleError(
            f"bundle {path}: weights tagged {stored_arch!r} but meta says {arch!r}"
        )
    bundle = TrainedModelBundle(
        architecture=arch,
        weights=tuple((n, a) for n, a in named),
        config=config_from_dict(meta["config"]),
        statistics=stats_from_dict(meta["statistics"]),
        model_index=int(meta["model_index"]),
    )
    instantiate(bundle)  # shape check against the declared architecture
    return bundle


def instantiate(bundle: TrainedModelBundle) -> Sequential:
    """Build the architecture and load the bundle's weights into it."""
    info = architecture_info(bundle.architecture)
    model = info.builder(np.random.default_rng(0))
    try:
        model.load_parameters(dict(bundle.weights))
    except ShapeError as exc:
        raise BundleError(f"weights do not fit {bundle.architecture}: {exc}")
    return model
