"""Generator and critic networks plus the masking/composition algebra.

The generator is an hourglass of 3-way dilated convolution blocks with skip
connections; its hard-sigmoid head keeps every output intensity in [0, 1].
The critic is a strided convolution funnel ending in a single linear neuron,
Lipschitz-constrained by clipping each layer's weight norm. The numpy-level
operations (mask_image, mask_noise, compose_output, sample_noise) define the
exact per-pixel contracts the networks are trained under.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ContractError, ValidationError, WgainError
from .masks import Mask

DILATION_RATES = (1, 2, 5)


def hard_sigmoid(x: torch.Tensor) -> torch.Tensor:
    """Piecewise-linear squash: 0 below -2.5, 0.2*x + 0.5 between, 1 above 2.5."""
    return torch.clamp(0.2 * x + 0.5, min=0.0, max=1.0)


@dataclass(frozen=True)
class GeneratorConfig:
    input_side: int = 128
    encoder_widths: tuple[int, ...] = (128, 128, 256, 512)
    decoder_widths: tuple[int, ...] = (256, 128, 128)
    dilation_rates: tuple[int, ...] = DILATION_RATES
    block_kernel: int = 5
    head_kernel: int = 3
    head_channels: int = 8

    def __post_init__(self):
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        object.__setattr__(self, "decoder_widths", tuple(int(w) for w in self.decoder_widths))
        object.__setattr__(self, "dilation_rates", tuple(int(d) for d in self.dilation_rates))
        if len(self.encoder_widths) < 2:
            raise ValidationError("need at least 2 encoder blocks")
        if len(self.decoder_widths) != len(self.encoder_widths) - 1:
            raise ValidationError(
                "decoder must have one block fewer than the encoder, got "
                f"{len(self.decoder_widths)} vs {len(self.encoder_widths)}"
            )
        for w in self.encoder_widths + self.decoder_widths:
            if w % 4 != 0:
                raise ValidationError(f"block widths must be divisible by 4 for the (n/2, n/4, n/4) split, got {w}")
        if len(self.dilation_rates) != 3 or min(self.dilation_rates) < 1:
            raise ValidationError(f"need exactly 3 positive dilation rates, got {self.dilation_rates}")
        pools = len(self.encoder_widths) - 1
        if self.input_side % (2**pools) != 0:
            raise ValidationError(
                f"input_side must be divisible by 2^{pools} = {2 ** pools}, got {self.input_side}"
            )


@dataclass(frozen=True)
class CriticConfig:
    widths: tuple[int, ...] = (64, 128, 256, 256, 512)
    kernel: int = 5
    stride: int = 2
    clip_norm: float = 1.0
    leaky_slope: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.clip_norm <= 0:
            raise ValidationError(f"clip_norm must be positive, got {self.clip_norm}")
        if not self.widths:
            raise ValidationError("critic needs at least one conv layer")


class DilatedBlock(nn.Module):
    """Three parallel same-size convolutions with dilation rates (1, 2, 5).

    Channel counts split as (n/2, n/4, n/4); each branch gets an ELU and the
    outputs concatenate back to n channels at unchanged resolution.
    `transposed=True` swaps in transposed convolutions (decoder blocks).
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 rates: tuple[int, int, int], transposed: bool = False):
        super().__init__()
        splits = (out_channels // 2, out_channels // 4, out_channels // 4)
        conv = nn.ConvTranspose2d if transposed else nn.Conv2d
        self.branches = nn.ModuleList(
            conv(in_channels, ch, kernel, stride=1, padding=rate * (kernel - 1) // 2, dilation=rate)
            for ch, rate in zip(splits, rates)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.cat([F.elu(branch(x)) for branch in self.branches], dim=1)


class Generator(nn.Module):
    """Hourglass inpainting network over the 7-channel (x~, z~, mask) input.

    Encoder blocks run at halving resolutions (2×2 max-pool between them);
    the bottleneck feeds the decoder directly, deeper encoder outputs join
    decoder inputs at matching resolutions in reverse order, and the raw
    input plus the first encoder output join at full resolution before the
    two-layer head.
    """

    IN_CHANNELS = 7

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        rates = cfg.dilation_rates
        enc_in = (self.IN_CHANNELS,) + cfg.encoder_widths[:-1]
        self.encoder = nn.ModuleList(
            DilatedBlock(ci, co, cfg.block_kernel, rates)
            for ci, co in zip(enc_in, cfg.encoder_widths)
        )
        dec_in = [cfg.encoder_widths[-1]]
        for j in range(1, len(cfg.decoder_widths)):
            skip_w = cfg.encoder_widths[len(cfg.encoder_widths) - 1 - j]
            dec_in.append(cfg.decoder_widths[j - 1] + skip_w)
        self.decoder = nn.ModuleList(
            DilatedBlock(ci, co, cfg.block_kernel, rates, transposed=True)
            for ci, co in zip(dec_in, cfg.decoder_widths)
        )
        self.pool = nn.MaxPool2d(2)
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        head_in = cfg.decoder_widths[-1] + cfg.encoder_widths[0] + self.IN_CHANNELS
        pad = (cfg.head_kernel - 1) // 2
        self.head1 = nn.ConvTranspose2d(head_in, cfg.head_channels, cfg.head_kernel, padding=pad)
        self.head2 = nn.ConvTranspose2d(cfg.head_channels, 3, cfg.head_kernel, padding=pad)

    def forward(self, x_tilde: torch.Tensor, z_tilde: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Map batched (B,3,H,W) masked image/noise and (B,1,H,W) mask to (B,3,H,W) in [0,1]."""
        if x_tilde.shape != z_tilde.shape or x_tilde.shape[-2:] != mask.shape[-2:]:
            raise ContractError(
                f"shape mismatch: image {tuple(x_tilde.shape)}, noise {tuple(z_tilde.shape)}, "
                f"mask {tuple(mask.shape)}"
            )
        inp = torch.cat([x_tilde, z_tilde, mask], dim=1)
        skips = []
        h = inp
        for i, block in enumerate(self.encoder):
            if i > 0:
                h = self.pool(h)
            h = block(h)
            skips.append(h)
        n_enc = len(self.encoder)
        for j, block in enumerate(self.decoder):
            if j > 0:
                h = torch.cat([h, skips[n_enc - 1 - j]], dim=1)
            h = block(h)
            h = self.up(h)
        h = torch.cat([h, skips[0], inp], dim=1)
        h = F.elu(self.head1(h))
        return hard_sigmoid(self.head2(h))


class Critic(nn.Module):
    """Strided convolution funnel scoring (image, mask) pairs with one scalar."""

    IN_CHANNELS = 4

    def __init__(self, cfg: CriticConfig, input_side: int):
        super().__init__()
        self.cfg = cfg
        self.input_side = int(input_side)
        pad = (cfg.kernel - 1) // 2
        chans = (self.IN_CHANNELS,) + cfg.widths
        self.convs = nn.ModuleList(
            nn.Conv2d(ci, co, cfg.kernel, stride=cfg.stride, padding=pad)
            for ci, co in zip(chans[:-1], chans[1:])
        )
        side = self.input_side
        for _ in cfg.widths:
            side = -(-side // cfg.stride)  # ceil division
        self.final = nn.Linear(cfg.widths[-1] * side * side, 1)

    def forward(self, image: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Map batched (B,3,H,W) image and (B,1,H,W) mask to (B,) scores."""
        if image.shape[-2:] != mask.shape[-2:]:
            raise ContractError(f"shape mismatch: image {tuple(image.shape)}, mask {tuple(mask.shape)}")
        h = torch.cat([image, mask], dim=1)
        for conv in self.convs:
            h = F.leaky_relu(conv(h), negative_slope=self.cfg.leaky_slope)
        return self.final(h.flatten(1)).squeeze(-1)


@dataclass
class WgainModel:
    """Generator/critic pair with the training step counter."""

    generator: Generator
    critic: Critic
    generator_config: GeneratorConfig
    critic_config: CriticConfig
    sigma: float = 0.1
    step: int = 0

    def assert_finite(self) -> None:
        for name, module in (("generator", self.generator), ("critic", self.critic)):
            for pname, p in module.named_parameters():
                if not torch.isfinite(p).all():
                    raise WgainError(f"non-finite parameter {name}.{pname}")


def build_model(
    gen_cfg: GeneratorConfig | None = None,
    critic_cfg: CriticConfig | None = None,
    seed: int = 0,
    sigma: float = 0.1,
) -> WgainModel:
    """Construct generator and critic with Glorot-uniform weights, zero biases."""
    gen_cfg = gen_cfg or GeneratorConfig()
    critic_cfg = critic_cfg or CriticConfig()
    if sigma <= 0:
        raise ValidationError(f"noise sigma must be positive, got {sigma}")
    with torch.random.fork_rng():
        torch.manual_seed(seed & 0x7FFFFFFF)
        generator = Generator(gen_cfg)
        critic = Critic(critic_cfg, gen_cfg.input_side)
        for module in (generator, critic):
            for name, p in module.named_parameters():
                if name.endswith("bias"):
                    nn.init.zeros_(p)
                else:
                    nn.init.xavier_uniform_(p)
    return WgainModel(generator, critic, gen_cfg, critic_cfg, sigma=sigma)


# scaling float32 weights rounds each element half an ulp, so a projected
# tensor can re-measure a few 1e-8 above the ball; inside this band the
# tensor counts as feasible, which also makes the projection idempotent
CLIP_SLACK = 1e-7


def clip_critic_weights(critic: Critic, clip_norm: float) -> None:
    """Project every critic weight tensor onto the L2 ball of radius clip_norm.

    w becomes w * min(1, clip_norm / ||w||_2); biases are untouched. The
    projection preserves direction, and a layer already on or inside the ball
    (up to float32 rounding) is returned bit-unchanged.
    """
    if clip_norm <= 0:
        raise ValidationError(f"clip_norm must be positive, got {clip_norm}")
    with torch.no_grad():
        for name, p in critic.named_parameters():
            if name.endswith("bias"):
                continue
            # norm accumulated in float64: float32 summation over a large
            # layer drifts by ~1e-5, far more than the feasibility band
            norm = float(torch.linalg.vector_norm(p.double()))
            if norm > clip_norm * (1.0 + CLIP_SLACK):
                p.mul_(clip_norm / norm)


# --- per-image numpy contracts ---------------------------------------------


def sample_noise(h: int, w: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """H×W×3 tensor of i.i.d. Normal(0, sigma^2) values."""
    if sigma <= 0:
        raise ValidationError(f"noise sigma must be positive, got {sigma}")
    return (rng.standard_normal((h, w, 3)) * sigma).astype(np.float32)


def _check_pair(x: np.ndarray, m: Mask) -> None:
    if x.ndim != 3 or x.shape[2] != 3:
        raise ContractError(f"image must be HxWx3, got shape {x.shape}")
    if x.shape[:2] != m.bits.shape:
        raise ContractError(f"image {x.shape[:2]} and mask {m.bits.shape} shapes differ")


def mask_image(x: np.ndarray, m: Mask) -> np.ndarray:
    """Zero out missing pixels; valid pixels stay bit-identical."""
    _check_pair(x, m)
    return x * m.bits[:, :, None]


def mask_noise(z: np.ndarray, m: Mask) -> np.ndarray:
    """Zero out noise at valid pixels; missing pixels keep their raw noise."""
    _check_pair(z, m)
    return z * (1 - m.bits)[:, :, None]


def compose_output(g_out: np.ndarray, x_tilde: np.ndarray, m: Mask) -> np.ndarray:
    """Per-pixel selector: generator values on missing pixels, x_tilde elsewhere."""
    _check_pair(g_out, m)
    if g_out.shape != x_tilde.shape:
        raise ContractError(f"generator output {g_out.shape} and image {x_tilde.shape} shapes differ")
    sel = m.bits[:, :, None]
    return g_out * (1 - sel) + x_tilde * sel


def compose_batch(g_out: torch.Tensor, x_tilde: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Batched composition on (B,3,H,W) tensors with (B,1,H,W) masks."""
    return g_out * (1.0 - mask) + x_tilde * mask


# --- numpy <-> torch adapters ----------------------------------------------


def image_to_tensor(x: np.ndarray) -> torch.Tensor:
    """H×W×3 float array to a (1,3,H,W) float32 tensor."""
    return torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """(1,3,H,W) or (3,H,W) tensor back to an H×W×3 float32 array."""
    if t.dim() == 4:
        t = t.squeeze(0)
    return t.detach().permute(1, 2, 0).cpu().numpy().astype(np.float32)


def mask_to_tensor(m: Mask) -> torch.Tensor:
    """Mask to a (1,1,H,W) float32 tensor."""
    return torch.from_numpy(m.bits.astype(np.float32)).unsqueeze(0).unsqueeze(0)


def generator_forward(generator: Generator, x_tilde: np.ndarray, z_tilde: np.ndarray, m: Mask) -> np.ndarray:
    """Single-image generator pass over numpy inputs, back to H×W×3 in [0,1]."""
    _check_pair(x_tilde, m)
    if x_tilde.shape != z_tilde.shape:
        raise ContractError(f"image {x_tilde.shape} and noise {z_tilde.shape} shapes differ")
    with torch.no_grad():
        out = generator(image_to_tensor(x_tilde), image_to_tensor(z_tilde), mask_to_tensor(m))
    res = tensor_to_image(out)
    if not np.isfinite(res).all():
        raise WgainError("generator produced non-finite output (bad parameters?)")
    return res


def critic_forward(critic: Critic, x: np.ndarray, m: Mask) -> float:
    """Single-image critic score over numpy inputs."""
    _check_pair(x, m)
    with torch.no_grad():
        score = critic(image_to_tensor(x), mask_to_tensor(m))
    return float(score.item())


def inpaint_image(
    generator: Generator,
    image: np.ndarray,
    m: Mask,
    rng: np.random.Generator,
    sigma: float = 0.1,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Full single-image pipeline: mask, noise-fill, generate, compose.

    Valid pixels of the result are bit-identical to the input image.
    """
    _check_pair(image, m)
    x_tilde = mask_image(image, m)
    z = noise if noise is not None else sample_noise(image.shape[0], image.shape[1], sigma, rng)
    z_tilde = mask_noise(z, m)
    g_out = generator_forward(generator, x_tilde, z_tilde, m)
    return compose_output(g_out, x_tilde, m)


def scaled_config(side: int, scale: int = 4) -> tuple[GeneratorConfig, CriticConfig]:
    """Reduced-width config pair for desk-scale runs (scale divides all widths)."""
    g = GeneratorConfig(
        input_side=side,
        encoder_widths=tuple(w // scale for w in (128, 128, 256, 512)),
        decoder_widths=tuple(w // scale for w in (256, 128, 128)),
    )
    c = CriticConfig(widths=tuple(w // scale for w in (64, 128, 256, 256, 512)))
    return g, c
