"""Checkpoint format: a JSON manifest plus named parameter arrays.

A checkpoint is a directory holding `manifest.json` (format version, configs,
step counter, content hash) and `params.npz` (every parameter tensor under
its qualified name). Loading rebuilds the networks from the stored configs,
verifies the content hash, and refuses a caller-supplied config that does not
match the stored one.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError
from .model import Critic, CriticConfig, Generator, GeneratorConfig, WgainModel

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.npz"


def _file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def state_hash(model: WgainModel) -> str:
    """Stable content hash over every parameter tensor (order-independent)."""
    digest = hashlib.sha256()
    for prefix, module in (("generator", model.generator), ("critic", model.critic)):
        for name, p in sorted(module.state_dict().items()):
            digest.update(f"{prefix}.{name}".encode())
            digest.update(p.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def save_checkpoint(path: str | Path, model: WgainModel) -> Path:
    """Write the model to a checkpoint directory; returns the directory path."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    model.assert_finite()

    arrays = {}
    for prefix, module in (("generator", model.generator), ("critic", model.critic)):
        for name, p in module.state_dict().items():
            arrays[f"{prefix}.{name}"] = p.detach().cpu().numpy()
    params_path = path / PARAMS_NAME
    np.savez(params_path, **arrays)

    manifest = {
        "format_version": FORMAT_VERSION,
        "step": int(model.step),
        "sigma": float(model.sigma),
        "generator_config": dataclasses.asdict(model.generator_config),
        "critic_config": dataclasses.asdict(model.critic_config),
        "params_sha256": _file_sha256(params_path),
        "param_names": sorted(arrays),
    }
    with open(path / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def read_manifest(path: str | Path) -> dict:
    manifest_path = Path(path) / MANIFEST_NAME
    if not manifest_path.is_file():
        raise CheckpointError(f"no checkpoint manifest at {manifest_path}")
    with open(manifest_path) as fh:
        return json.load(fh)


def checkpoint_hash(path: str | Path) -> str:
    """The content hash recorded in a checkpoint's manifest."""
    return read_manifest(path)["params_sha256"]


def load_checkpoint(
    path: str | Path,
    expected_generator: GeneratorConfig | None = None,
    expected_critic: CriticConfig | None = None,
) -> WgainModel:
    """Rebuild a model from a checkpoint directory.

    Verifies the stored content hash and, when expected configs are given,
    that they match the stored ones exactly.
    """
    path = Path(path)
    manifest = read_manifest(path)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {manifest.get('format_version')}")

    gen_cfg = GeneratorConfig(**manifest["generator_config"])
    critic_cfg = CriticConfig(**manifest["critic_config"])
    if expected_generator is not None and expected_generator != gen_cfg:
        raise CheckpointError(f"generator config mismatch: expected {expected_generator}, stored {gen_cfg}")
    if expected_critic is not None and expected_critic != critic_cfg:
        raise CheckpointError(f"critic config mismatch: expected {expected_critic}, stored {critic_cfg}")

    params_path = path / PARAMS_NAME
    if not params_path.is_file():
        raise CheckpointError(f"checkpoint parameters missing at {params_path}")
    actual = _file_sha256(params_path)
    if actual != manifest["params_sha256"]:
        raise CheckpointError(
            f"checkpoint content hash mismatch: manifest {manifest['params_sha256']}, file {actual}"
        )

    generator = Generator(gen_cfg)
    critic = Critic(critic_cfg, gen_cfg.input_side)
    with np.load(params_path) as arrays:
        gen_state = {
            k[len("generator.") :]: torch.from_numpy(arrays[k])
            for k in arrays.files
            if k.startswith("generator.")
        }
        critic_state = {
            k[len("critic.") :]: torch.from_numpy(arrays[k])
            for k in arrays.files
            if k.startswith("critic.")
        }
    try:
        generator.load_state_dict(gen_state)
        critic.load_state_dict(critic_state)
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint parameters do not fit their config: {exc}") from exc
    return WgainModel(
        generator,
        critic,
        gen_cfg,
        critic_cfg,
        sigma=float(manifest.get("sigma", 0.1)),
        step=int(manifest.get("step", 0)),
    )
