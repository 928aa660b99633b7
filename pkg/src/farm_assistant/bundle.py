"""Versioned on-disk format for a trained engine.

A bundle directory holds three files:

  config.json           model/pipeline configuration, label sets, thresholds,
                        the domain, and the synonym map
  featurizer_state.json fitted vocabularies, regex patterns, and (when the
                        dense path is on) the embedding table
  params.bin            every learned tensor from both models, flat float64

params.bin layout: a little-endian uint32 byte length, a UTF-8 JSON header
{"format_version": 1, "tensors": [{"name", "shape"}, ...]}, then the tensor
payloads concatenated in header order as little-endian float64, row major.
Tensor names are prefixed "diet." or "ted.". Loading any file whose
format_version differs from FORMAT_VERSION raises BundleVersionError; the
short model_version exposed by the server is a content hash of params.bin.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .diet import DietConfig, DietParams, diet_params_from_arrays
from .domain import DomainSpec
from .embeddings import EmbeddingTable
from .errors import BundleVersionError, MissingFile
from .featurizers import FeaturizerState
from .ted import TedConfig, TedParams, ted_params_from_arrays

FORMAT_VERSION = 1

CONFIG_FILE = "config.json"
FEATURIZER_FILE = "featurizer_state.json"
PARAMS_FILE = "params.bin"


def write_params(path: Path, named: list[tuple[str, np.ndarray]]) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in named],
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in named:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_params(path: Path) -> dict[str, np.ndarray]:
    """Named arrays from params.bin, reshaped per the declared shapes."""
    raw = path.read_bytes()
    if len(raw) < 4:
        raise BundleVersionError(None, FORMAT_VERSION)
    (header_len,) = struct.unpack("<I", raw[:4])
    header = json.loads(raw[4:4 + header_len].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise BundleVersionError(header.get("format_version"), FORMAT_VERSION)
    out: dict[str, np.ndarray] = {}
    offset = 4 + header_len
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        out[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += count * 8
    return out


def model_version_of(params_path: Path) -> str:
    return hashlib.sha256(params_path.read_bytes()).hexdigest()[:12]


@dataclass
class LoadedBundle:
    diet_params: DietParams
    ted_params: TedParams
    featurizer_state: FeaturizerState
    embedding_table: Optional[EmbeddingTable]
    domain: DomainSpec
    synonyms: dict
    fallback_threshold: float
    ambiguity_threshold: float
    model_version: str


def save_bundle(directory, diet_params: DietParams, ted_params: TedParams,
                featurizer_state: FeaturizerState,
                embedding_table: Optional[EmbeddingTable],
                domain: DomainSpec, synonyms: dict,
                fallback_threshold: float, ambiguity_threshold: float) -> str:
    """Write the three bundle files; returns the model_version hash."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    named = [(f"diet.{n}", t.data) for n, t in diet_params.tensors()]
    named += [(f"ted.{n}", t.data) for n, t in ted_params.tensors()]
    write_params(directory / PARAMS_FILE, named)

    config = {
        "format_version": FORMAT_VERSION,
        "diet": diet_params.config.to_dict(),
        "ted": ted_params.config.to_dict(),
        "intent_names": list(diet_params.intent_names),
        "tag_names": list(diet_params.tag_names),
        "action_names": list(ted_params.action_names),
        "feature_width": ted_params.feature_width,
        "domain": domain.to_dict(),
        "synonyms": dict(synonyms),
        "fallback_threshold": fallback_threshold,
        "ambiguity_threshold": ambiguity_threshold,
    }
    (directory / CONFIG_FILE).write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    feat = {
        "format_version": FORMAT_VERSION,
        "featurizer_state": featurizer_state.to_dict(),
        "embedding_table": embedding_table.to_dict() if embedding_table else None,
    }
    (directory / FEATURIZER_FILE).write_text(
        json.dumps(feat, sort_keys=True) + "\n", encoding="utf-8")

    return model_version_of(directory / PARAMS_FILE)


def load_bundle(directory) -> LoadedBundle:
    directory = Path(directory)
    for name in (CONFIG_FILE, FEATURIZER_FILE, PARAMS_FILE):
        if not (directory / name).is_file():
            raise MissingFile(str(directory / name))

    config = json.loads((directory / CONFIG_FILE).read_text(encoding="utf-8"))
    if config.get("format_version") != FORMAT_VERSION:
        raise BundleVersionError(config.get("format_version"), FORMAT_VERSION)
    feat = json.loads((directory / FEATURIZER_FILE).read_text(encoding="utf-8"))
    if feat.get("format_version") != FORMAT_VERSION:
        raise BundleVersionError(feat.get("format_version"), FORMAT_VERSION)

    arrays = read_params(directory / PARAMS_FILE)
    diet_arrays = {n[len("diet."):]: a for n, a in arrays.items() if n.startswith("diet.")}
    ted_arrays = {n[len("ted."):]: a for n, a in arrays.items() if n.startswith("ted.")}

    diet_params = diet_params_from_arrays(
        DietConfig.from_dict(config["diet"]), config["intent_names"],
        config["tag_names"], diet_arrays)
    ted_params = ted_params_from_arrays(
        TedConfig.from_dict(config["ted"]), int(config["feature_width"]),
        config["action_names"], ted_arrays)

    table = feat.get("embedding_table")
    return LoadedBundle(
        diet_params=diet_params,
        ted_params=ted_params,
        featurizer_state=FeaturizerState.from_dict(feat["featurizer_state"]),
        embedding_table=EmbeddingTable.from_dict(table) if table else None,
        domain=DomainSpec.from_dict(config["domain"]),
        synonyms=dict(config["synonyms"]),
        fallback_threshold=float(config["fallback_threshold"]),
        ambiguity_threshold=float(config["ambiguity_threshold"]),
        model_version=model_version_of(directory / PARAMS_FILE),
    )
