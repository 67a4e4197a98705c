"""Adversarial training loop: alternating critic/generator Adam updates.

Each optimization step pairs one critic update (score gap between real and
imputed batches, followed by weight-norm clipping) with one generator update
(negative critic score plus weighted reconstruction loss). Masks and noise
are redrawn per sample every epoch from named RNG streams, so a run is fully
determined by its seed.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoints import save_checkpoint
from .corpus import Corpus
from .errors import DivergenceError, ValidationError
from .masks import Mask, ScenarioSpec, sample_training_mask
from .model import (
    CriticConfig,
    GeneratorConfig,
    WgainModel,
    build_model,
    clip_critic_weights,
    compose_batch,
    sample_noise,
)
from .seeding import named_stream

log = logging.getLogger(__name__)

RECON_KINDS = ("mae", "mse")


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 5e-5
    batch: int = 32
    lambda_f: float = 1.0
    lambda_g: float = 0.005
    lambda_mae: float = 1.0
    epochs: int = 1
    sigma: float = 0.1
    clip_norm: float = 1.0
    recon_loss: str = "mae"
    seed: int = 0
    checkpoint_every: int = 0
    log_every: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError(f"learning rate must be positive, got {self.alpha}")
        if self.batch < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch}")
        for name in ("lambda_f", "lambda_g", "lambda_mae"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if self.sigma <= 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.clip_norm <= 0:
            raise ValidationError(f"clip_norm must be positive, got {self.clip_norm}")
        if self.recon_loss not in RECON_KINDS:
            raise ValidationError(f"recon_loss must be one of {RECON_KINDS}, got {self.recon_loss!r}")


@dataclass(frozen=True)
class StepReport:
    step: int
    critic_objective: float
    generator_objective: float
    recon_loss_value: float
    wall_time: float

    @property
    def finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.critic_objective, self.generator_objective, self.recon_loss_value)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "critic_objective": self.critic_objective,
                "generator_objective": self.generator_objective,
                "recon_loss_value": self.recon_loss_value,
                "wall_time": self.wall_time,
            }
        )


def batch_tensors(
    images: list[np.ndarray],
    masks: list[Mask],
    noises: list[np.ndarray],
    dtype: torch.dtype = torch.float32,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Stack per-image arrays into (B,3,H,W) image/noise and (B,1,H,W) mask tensors."""
    if not images or not (len(images) == len(masks) == len(noises)):
        raise ValidationError("batch parts must be non-empty and of equal length")
    x = torch.from_numpy(np.stack(images)).permute(0, 3, 1, 2).to(dtype)
    z = torch.from_numpy(np.stack(noises)).permute(0, 3, 1, 2).to(dtype)
    m = torch.from_numpy(np.stack([mk.bits for mk in masks])).unsqueeze(1).to(dtype)
    return x, z, m


def recon_penalty(x_hat: torch.Tensor, x: torch.Tensor, kind: str) -> torch.Tensor:
    """Reconstruction loss: mean absolute error (default) or mean squared error."""
    if kind == "mae":
        return (x_hat - x).abs().mean()
    if kind == "mse":
        return (x_hat - x).square().mean()
    raise ValidationError(f"unknown recon loss kind {kind!r}")


def critic_loss(
    model: WgainModel, x: torch.Tensor, z: torch.Tensor, m: torch.Tensor, cfg: TrainConfig
) -> torch.Tensor:
    """lambda_f * (mean score of imputed batch - mean score of real batch).

    The imputed batch is built under no_grad so the loss graph touches only
    critic parameters.
    """
    with torch.no_grad():
        x_tilde = x * m
        z_tilde = z * (1.0 - m)
        x_hat = compose_batch(model.generator(x_tilde, z_tilde, m), x_tilde, m)
    score_fake = model.critic(x_hat, m).mean()
    score_real = model.critic(x, m).mean()
    return cfg.lambda_f * (score_fake - score_real)


def generator_loss(
    model: WgainModel, x: torch.Tensor, z: torch.Tensor, m: torch.Tensor, cfg: TrainConfig
) -> tuple[torch.Tensor, torch.Tensor]:
    """(-lambda_g * mean critic score + lambda_mae * recon, recon) on the composed batch."""
    x_tilde = x * m
    z_tilde = z * (1.0 - m)
    x_hat = compose_batch(model.generator(x_tilde, z_tilde, m), x_tilde, m)
    score_fake = model.critic(x_hat, m).mean()
    recon = recon_penalty(x_hat, x, cfg.recon_loss)
    return -cfg.lambda_g * score_fake + cfg.lambda_mae * recon, recon


class Trainer:
    """Owns the model and both Adam optimizers; one instance per training run."""

    def __init__(self, model: WgainModel, cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        betas = (cfg.adam_beta1, cfg.adam_beta2)
        self.critic_opt = torch.optim.Adam(
            model.critic.parameters(), lr=cfg.alpha, betas=betas, eps=cfg.adam_eps
        )
        self.gen_opt = torch.optim.Adam(
            model.generator.parameters(), lr=cfg.alpha, betas=betas, eps=cfg.adam_eps
        )

    def _zero_grads(self) -> None:
        self.critic_opt.zero_grad(set_to_none=True)
        self.gen_opt.zero_grad(set_to_none=True)

    def critic_step(self, x: torch.Tensor, z: torch.Tensor, m: torch.Tensor) -> StepReport:
        """One Adam update of the critic followed by weight-norm clipping.

        Generator parameters are untouched (bit-identical before and after).
        """
        t0 = time.perf_counter()
        self._zero_grads()
        loss = critic_loss(self.model, x, z, m, self.cfg)
        value = float(loss.item())
        report = StepReport(self.model.step, value, math.nan, math.nan, time.perf_counter() - t0)
        if not math.isfinite(value):
            raise DivergenceError(f"critic objective diverged at step {self.model.step}", report)
        loss.backward()
        self.critic_opt.step()
        clip_critic_weights(self.model.critic, self.cfg.clip_norm)
        return StepReport(self.model.step, value, math.nan, math.nan, time.perf_counter() - t0)

    def generator_step(self, x: torch.Tensor, z: torch.Tensor, m: torch.Tensor) -> StepReport:
        """One Adam update of the generator; critic parameters stay bit-identical."""
        t0 = time.perf_counter()
        self._zero_grads()
        loss, recon = generator_loss(self.model, x, z, m, self.cfg)
        value, recon_value = float(loss.item()), float(recon.item())
        report = StepReport(self.model.step, math.nan, value, recon_value, time.perf_counter() - t0)
        if not math.isfinite(value):
            raise DivergenceError(f"generator objective diverged at step {self.model.step}", report)
        loss.backward()
        self.gen_opt.step()
        # backward also populated critic grads; drop them so the next critic
        # step starts clean
        self.critic_opt.zero_grad(set_to_none=True)
        return StepReport(self.model.step, math.nan, value, recon_value, time.perf_counter() - t0)

    def joint_step(self, x: torch.Tensor, z: torch.Tensor, m: torch.Tensor) -> StepReport:
        """Strict 1:1 alternation: one critic step then one generator step."""
        c = self.critic_step(x, z, m)
        g = self.generator_step(x, z, m)
        self.model.step += 1
        return StepReport(
            self.model.step,
            c.critic_objective,
            g.generator_objective,
            g.recon_loss_value,
            c.wall_time + g.wall_time,
        )


def train(
    corpus: Corpus,
    cfg: TrainConfig,
    generator_config: GeneratorConfig | None = None,
    critic_config: CriticConfig | None = None,
    model: WgainModel | None = None,
    out_dir: str | Path | None = None,
) -> tuple[WgainModel, list[StepReport]]:
    """Run the full training loop over the corpus.

    Per epoch the corpus order is reshuffled and every sample draws a fresh
    scenario mask and noise tensor; each mini-batch takes one critic step
    then one generator step. Periodic and final checkpoints plus a JSONL
    metrics log land in out_dir when given. On divergence the error
    propagates and the last periodic checkpoint is left in place.
    """
    if len(corpus) == 0:
        raise ValidationError("training corpus is empty")
    if model is None:
        model = build_model(generator_config, critic_config, seed=cfg.seed, sigma=cfg.sigma)
    trainer = Trainer(model, cfg)

    mask_spec = ScenarioSpec.training_mixture()
    mask_rng = named_stream(cfg.seed, "train-mask")
    noise_rng = named_stream(cfg.seed, "train-noise")
    shuffle_rng = named_stream(cfg.seed, "train-shuffle")

    out_path = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out_path / "metrics.jsonl", "a")

    side = corpus.target_side
    reports: list[StepReport] = []
    try:
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(len(corpus))
            for start in range(0, len(order), cfg.batch):
                idx = order[start : start + cfg.batch]
                images = [corpus[int(i)] for i in idx]
                masks = [sample_training_mask(mask_spec, side, side, mask_rng) for _ in idx]
                noises = [sample_noise(side, side, cfg.sigma, noise_rng) for _ in idx]
                x, z, m = batch_tensors(images, masks, noises)
                report = trainer.joint_step(x, z, m)
                reports.append(report)
                if metrics_fh is not None:
                    metrics_fh.write(report.to_json() + "\n")
                if cfg.log_every and report.step % cfg.log_every == 0:
                    log.info(
                        "step %d epoch %d critic %.5f generator %.5f recon %.5f",
                        report.step, epoch, report.critic_objective,
                        report.generator_objective, report.recon_loss_value,
                    )
                if (
                    out_path is not None
                    and cfg.checkpoint_every
                    and report.step % cfg.checkpoint_every == 0
                ):
                    save_checkpoint(out_path / "checkpoint", model)
                    metrics_fh.flush()
    finally:
        if metrics_fh is not None:
            metrics_fh.close()

    if out_path is not None:
        save_checkpoint(out_path / "checkpoint", model)
    return model, reports
