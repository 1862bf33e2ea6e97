"""The duet architecture: three sequence VAEs and two transformer decoders.

VAE 1 and VAE 2 each encode one dancer; VAE 3 encodes the elementwise
distance between them.  To predict dancer 2, the decoder attends over the
memory ``D1 = O1 + O3`` (dancer 1's reconstruction plus the interaction
reconstruction) while reading dancer 2's own past under a causal mask.
Dancer 1 is predicted symmetrically from ``D2 = O2 + O3``.

Public array arguments are (T, M, D) for one sequence or (B, T, M, D) for a
batch; internally everything runs time-major as (T, B, M*D).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError
from .nn import functional as F
from .nn.autograd import DTYPE, Tensor, as_tensor, relu
from .nn.modules import LSTM, ConvSmooth, LayerNorm, Linear, Module, MultiHeadAttention
from .preprocess import NormStats


@dataclass(frozen=True)
class ModelConfig:
    n_joints: int = 29
    n_dims: int = 3
    d_model: int = 64
    n_heads: int = 8
    latent_dim: int = 64
    lstm_layers: int = 2
    conv_kernel: int = 5
    decoder_layers: int = 1
    ff_dim: int = 256

    def __post_init__(self):
        for name, value in asdict(self).items():
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if self.d_model % 2:
            raise ValueError("d_model must be even for the positional encoding")
        if self.conv_kernel % 2 == 0:
            raise ValueError("conv_kernel must be odd")

    @property
    def features(self):
        return self.n_joints * self.n_dims


# -- layout helpers ------------------------------------------------------------

def to_time_major(x, cfg: ModelConfig):
    """(T, M, D) or (B, T, M, D) -> Tensor (T, B, M*D); also returns whether a batch axis was present."""
    x = as_tensor(x)
    if x.ndim == 3:
        batched = False
        x = x.reshape(1, *x.shape)
    elif x.ndim == 4:
        batched = True
    else:
        raise DimensionError(f"expected (T, M, D) or (B, T, M, D), got shape {x.shape}")
    B, T, M, D = x.shape
    if (M, D) != (cfg.n_joints, cfg.n_dims):
        raise DimensionError(f"joint layout {(M, D)} does not match the model's {(cfg.n_joints, cfg.n_dims)}")
    return x.reshape(B, T, M * D).transpose(1, 0, 2), batched


def from_time_major(x, cfg: ModelConfig, batched):
    T, B, _ = x.shape
    out = x.transpose(1, 0, 2).reshape(B, T, cfg.n_joints, cfg.n_dims)
    return out if batched else out.reshape(T, cfg.n_joints, cfg.n_dims)


# -- modules -------------------------------------------------------------------

class DancerVAE(Module):
    """Encoder: linear embed, positional encoding, self-attention, 2-layer LSTM,
    per-frame mean and log-variance heads.  Decoder: LSTM over the latent
    sequence, temporal smoothing convolution, linear map back to joints."""

    def __init__(self, cfg: ModelConfig, rng):
        d, L = cfg.d_model, cfg.latent_dim
        self.config = cfg
        self.embed = Linear(cfg.features, d, rng)
        self.attn = MultiHeadAttention(d, cfg.n_heads, rng)
        self.enc_lstm = LSTM(d, d, cfg.lstm_layers, rng)
        self.mu_head = Linear(d, L, rng)
        self.logvar_head = Linear(d, L, rng)
        self.dec_lstm = LSTM(L, d, cfg.lstm_layers, rng)
        self.smooth = ConvSmooth(cfg.conv_kernel, d, rng)
        self.out = Linear(d, cfg.features, rng)

    def encode(self, x):
        e = self.embed(x)
        e = e + F.positional_encoding(e.shape[0], self.config.d_model)[:, None, :]
        h = e + self.attn(e, e)
        h, _ = self.enc_lstm(h)
        return self.mu_head(h), self.logvar_head(h)

    def decode(self, z):
        h, _ = self.dec_lstm(z)
        return self.out(self.smooth(h))

    def __call__(self, x, rng=None, sample=True):
        mu, log_var = self.encode(x)
        eps = None if sample else np.zeros(mu.shape, dtype=DTYPE)
        latent = F.reparameterize(mu, log_var, rng=rng, eps=eps)
        return self.decode(latent.z), latent


class DecoderLayer(Module):
    def __init__(self, cfg: ModelConfig, rng):
        d = cfg.d_model
        self.self_attn = MultiHeadAttention(d, cfg.n_heads, rng)
        self.norm1 = LayerNorm(d)
        self.cross_attn = MultiHeadAttention(d, cfg.n_heads, rng)
        self.norm2 = LayerNorm(d)
        self.ff1 = Linear(d, cfg.ff_dim, rng)
        self.ff2 = Linear(cfg.ff_dim, d, rng)
        self.norm3 = LayerNorm(d)

    def __call__(self, x, memory):
        x = self.norm1(x + self.self_attn(x, x, causal_mask=True))
        x = self.norm2(x + self.cross_attn(x, memory))
        return self.norm3(x + self.ff2(relu(self.ff1(x))))


class TransformerDecoder(Module):
    """Post-norm transformer decoder mapping (target, memory) to next-frame predictions."""

    def __init__(self, cfg: ModelConfig, rng):
        self.config = cfg
        self.target_in = Linear(cfg.features, cfg.d_model, rng)
        self.memory_in = Linear(cfg.features, cfg.d_model, rng)
        self.layers = [DecoderLayer(cfg, rng) for _ in range(cfg.decoder_layers)]
        self.out = Linear(cfg.d_model, cfg.features, rng)

    def embed_memory(self, memory):
        return self.memory_in(memory)

    def __call__(self, target, memory=None, memory_embedded=None):
        if memory_embedded is None:
            memory_embedded = self.embed_memory(memory)
        x = self.target_in(target)
        x = x + F.positional_encoding(x.shape[0], self.config.d_model)[:, None, :]
        for layer in self.layers:
            x = layer(x, memory_embedded)
        return self.out(x)


class DuetModel(Module):
    def __init__(self, config: ModelConfig | None = None, seed=0, norm_stats: NormStats | None = None):
        self.config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        self.vae1 = DancerVAE(self.config, rng)
        self.vae2 = DancerVAE(self.config, rng)
        self.vae3 = DancerVAE(self.config, rng)
        self.decoder1 = TransformerDecoder(self.config, rng)
        self.decoder2 = TransformerDecoder(self.config, rng)
        self.norm_stats = norm_stats
        for name, p in self.named_parameters():
            p.name = name

    def vae(self, dancer):
        return {1: self.vae1, 2: self.vae2}[dancer]

    def decoder(self, dancer):
        return {1: self.decoder1, 2: self.decoder2}[dancer]

    def group(self, *names):
        """Parameters of the named submodules, e.g. ``group("vae1", "vae2")``."""
        return [p for n in names for p in getattr(self, n).parameters()]


# -- forward passes ------------------------------------------------------------

@dataclass
class DuetForwardOutput:
    O1: Tensor
    O2: Tensor
    O3: Tensor
    D1: Tensor
    D2: Tensor
    prediction: Tensor
    predictions: dict
    latents: tuple
    target_dancer: object


def vae_forward(vae: DancerVAE, x, rng=None, sample=True):
    """Reconstruct ``x`` through ``vae``; returns ``(recon, latent)`` in the input layout."""
    cfg = vae.config
    xt, batched = to_time_major(x, cfg)
    recon, latent = vae(xt, rng=rng, sample=sample)
    return from_time_major(recon, cfg, batched), latent


def decoder_forward(decoder: TransformerDecoder, target, memory):
    """Teacher-forced next-frame prediction: output frame t depends only on
    ``target[:t+1]`` and the whole ``memory``."""
    cfg = decoder.config
    tt, batched = to_time_major(target, cfg)
    mt, mbatched = to_time_major(memory, cfg)
    if tt.shape[1] != mt.shape[1]:
        raise DimensionError(f"target batch {tt.shape[1]} and memory batch {mt.shape[1]} differ")
    return from_time_major(decoder(tt, mt), cfg, batched)


def duet_forward(model: DuetModel, x1, x2, target_dancer=2, rng=None, sample=True):
    """Full pass over a (normalized) duet.

    ``target_dancer`` is 1, 2 or ``"both"``.  ``prediction[t]`` estimates
    the target dancer's frame ``t + 1``.
    """
    cfg = model.config
    if target_dancer not in (1, 2, "both"):
        raise ValueError(f"target_dancer must be 1, 2 or 'both', got {target_dancer!r}")
    a = x1.data if isinstance(x1, Tensor) else np.asarray(x1, dtype=DTYPE)
    b = x2.data if isinstance(x2, Tensor) else np.asarray(x2, dtype=DTYPE)
    if a.shape != b.shape:
        raise DimensionError(f"dancer inputs differ in shape: {a.shape} vs {b.shape}")
    t1, batched = to_time_major(x1, cfg)
    t2, _ = to_time_major(x2, cfg)
    t3, _ = to_time_major(np.abs(a - b), cfg)

    o1, lat1 = model.vae1(t1, rng=rng, sample=sample)
    o2, lat2 = model.vae2(t2, rng=rng, sample=sample)
    o3, lat3 = model.vae3(t3, rng=rng, sample=sample)
    d1 = o1 + o3
    d2 = o2 + o3

    wanted = (1, 2) if target_dancer == "both" else (target_dancer,)
    predictions = {}
    for dancer in wanted:
        if dancer == 2:
            pred = model.decoder2(t2, d1)
        else:
            pred = model.decoder1(t1, d2)
        predictions[dancer] = from_time_major(pred, cfg, batched)

    def back(t):
        return from_time_major(t, cfg, batched)

    main = predictions[2] if target_dancer == "both" else predictions[target_dancer]
    return DuetForwardOutput(
        O1=back(o1), O2=back(o2), O3=back(o3), D1=back(d1), D2=back(d2),
        prediction=main, predictions=predictions, latents=(lat1, lat2, lat3),
        target_dancer=target_dancer,
    )
