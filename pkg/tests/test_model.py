import json

import numpy as np
import pytest

from duetvae.checkpoint import dumps_checkpoint, load_checkpoint, loads_checkpoint, read_checkpoint_meta, save_checkpoint
from duetvae.errors import DimensionError, ParseError
from duetvae.losses import kl_loss, mse_loss
from duetvae.model import DancerVAE, DuetModel, ModelConfig, decoder_forward, duet_forward, vae_forward
from duetvae.preprocess import NormStats, compute_norm_stats, normalize, sliding_windows, teacher_forcing_pair
from duetvae.synth import synth_duet
from duetvae.training import Adam

from helpers import small_config


def expected_parameters(cfg):
    """Closed-form count written independently of the module code."""
    F, d, lat, L, k, ff = cfg.features, cfg.d_model, cfg.latent_dim, cfg.lstm_layers, cfg.conv_kernel, cfg.ff_dim

    def linear(i, o):
        return i * o + o

    def lstm(i, h, layers):
        return sum((i if n == 0 else h) * 4 * h + h * 4 * h + 4 * h for n in range(layers))

    mha = 4 * (d * d + d)
    vae = linear(F, d) + mha + lstm(d, d, L) + 2 * linear(d, lat) + lstm(lat, d, L) + k * d + linear(d, F)
    layer = 2 * mha + 3 * 2 * d + linear(d, ff) + linear(ff, d)
    decoder = 2 * linear(F, d) + cfg.decoder_layers * layer + linear(d, F)
    return 3 * vae + 2 * decoder


def duet_data(cfg, T=12, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.normal(size=(T, cfg.n_joints, cfg.n_dims)), rng.normal(size=(T, cfg.n_joints, cfg.n_dims)))


# -- configuration and size ----------------------------------------------------

@pytest.mark.parametrize("cfg", [ModelConfig(), small_config(), small_config(decoder_layers=2, lstm_layers=3)])
def test_parameter_count(cfg):
    assert DuetModel(cfg).num_parameters() == expected_parameters(cfg)


def test_default_parameter_count_frozen():
    assert DuetModel().num_parameters() == 673_331


@pytest.mark.parametrize("kwargs", [dict(d_model=30, n_heads=8), dict(conv_kernel=4), dict(latent_dim=0),
                                    dict(d_model=9, n_heads=3)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ModelConfig(**kwargs)


def test_parameter_names_unique_and_grouped():
    model = DuetModel(small_config())
    names = [n for n, _ in model.named_parameters()]
    assert len(names) == len(set(names))
    assert all(p.name == n for n, p in model.named_parameters())
    vae_names = {p.name for p in model.group("vae1", "vae2")}
    assert vae_names and all(n.startswith(("vae1.", "vae2.")) for n in vae_names)


# -- VAE ---------------------------------------------------------------------------

def test_vae_shapes_full_size():
    cfg = ModelConfig()
    vae = DancerVAE(cfg, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(64, 29, 3))
    recon, lat = vae_forward(vae, x, np.random.default_rng(2))
    assert recon.shape == (64, 29, 3)
    assert lat.mu.shape == (64, 1, cfg.latent_dim)


def test_vae_determinism_and_latent_contract():
    cfg = small_config()
    vae = DancerVAE(cfg, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(3, 10, 4, 3))
    r1, l1 = vae_forward(vae, x, np.random.default_rng(5))
    r2, l2 = vae_forward(vae, x, np.random.default_rng(5))
    assert r1.shape == x.shape
    assert np.array_equal(r1.data, r2.data) and np.array_equal(l1.z.data, l2.z.data)
    assert np.all(l1.sigma.data > 0)
    assert np.array_equal(l1.z.data, l1.mu.data + l1.sigma.data * l1.eps)


def test_vae_rejects_wrong_layout():
    vae = DancerVAE(small_config(), np.random.default_rng(0))
    with pytest.raises(DimensionError):
        vae_forward(vae, np.zeros((8, 5, 3)), np.random.default_rng(0))


def test_vae_overfits_single_sequence():
    cfg = small_config()
    a, _ = synth_duet(16, joints=4, seed=0, style="lead-follow")
    x = normalize(a.data, compute_norm_stats([a.data]))
    vae = DancerVAE(cfg, np.random.default_rng(0))
    for name, p in vae.named_parameters():
        p.name = name
    rng = np.random.default_rng(1)
    opt = Adam()
    initial = mse_loss(vae_forward(vae, x, sample=False)[0], x).item()
    for _ in range(500):
        recon, lat = vae_forward(vae, x, rng)
        loss = mse_loss(recon, x) + kl_loss(lat.mu, lat.log_var) * 5e-5
        for p in vae.parameters():
            p.zero_grad()
        loss.backward()
        opt.step(vae.parameters(), 1e-3)
    final = mse_loss(vae_forward(vae, x, sample=False)[0], x).item()
    assert final < 0.05 * initial


# -- duet forward --------------------------------------------------------------

def test_memory_is_sum_of_reconstructions():
    cfg = small_config()
    model = DuetModel(cfg, seed=1)
    x1, x2 = duet_data(cfg)
    out = duet_forward(model, x1, x2, target_dancer=2, rng=np.random.default_rng(0))
    assert np.array_equal(out.D1.data, out.O1.data + out.O3.data)
    assert np.array_equal(out.D2.data, out.O2.data + out.O3.data)
    assert out.prediction.shape == x1.shape
    assert len(out.latents) == 3


def test_vae3_sees_proximity():
    cfg = small_config()
    model = DuetModel(cfg, seed=1)
    x1, x2 = duet_data(cfg)
    out = duet_forward(model, x1, x2, rng=np.random.default_rng(0), sample=False)
    o3, _ = vae_forward(model.vae3, np.abs(x1 - x2), sample=False)
    assert np.array_equal(out.O3.data, o3.data)


def test_teacher_forcing_target_is_one_frame_ahead():
    a, b = synth_duet(40, joints=4, seed=0)
    w = sliding_windows(a.data, 17, 8)
    X, Y = teacher_forcing_pair(w)
    assert X.shape[1] == Y.shape[1] == 16
    assert np.array_equal(Y[:, :-1], X[:, 1:])
    assert np.array_equal(Y[0], a.data[1:17])


def test_weight_tied_symmetry():
    cfg = small_config()
    model = DuetModel(cfg, seed=2)
    for (_, p1), (_, p2) in zip(model.vae1.named_parameters(), model.vae2.named_parameters()):
        p2.values = p1.data.copy()
    for (_, p1), (_, p2) in zip(model.decoder2.named_parameters(), model.decoder1.named_parameters()):
        p2.values = p1.data.copy()
    x1, x2 = duet_data(cfg)
    a = duet_forward(model, x1, x2, target_dancer=2, sample=False).prediction.data
    b = duet_forward(model, x2, x1, target_dancer=1, sample=False).prediction.data
    assert np.array_equal(a, b)


def test_both_targets_match_single():
    cfg = small_config()
    model = DuetModel(cfg, seed=3)
    x1, x2 = duet_data(cfg)
    both = duet_forward(model, x1, x2, "both", sample=False)
    one = duet_forward(model, x1, x2, 1, sample=False)
    assert np.array_equal(both.predictions[1].data, one.prediction.data)
    assert np.array_equal(both.prediction.data, both.predictions[2].data)


def test_duet_forward_determinism():
    cfg = small_config()
    model = DuetModel(cfg, seed=4)
    x1, x2 = duet_data(cfg, T=8)
    a = duet_forward(model, x1, x2, rng=np.random.default_rng(9))
    b = duet_forward(model, x1, x2, rng=np.random.default_rng(9))
    assert np.array_equal(a.prediction.data, b.prediction.data)


def test_duet_forward_errors():
    cfg = small_config()
    model = DuetModel(cfg)
    x1, x2 = duet_data(cfg)
    with pytest.raises(DimensionError):
        duet_forward(model, x1, x2[:5], rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        duet_forward(model, x1, x2, target_dancer=3, rng=np.random.default_rng(0))


def test_decoder_causality_with_fixed_memory():
    cfg = small_config()
    model = DuetModel(cfg, seed=5)
    rng = np.random.default_rng(6)
    x1, x2 = duet_data(cfg, T=10)
    memory = duet_forward(model, x1, x2, rng=np.random.default_rng(0)).D1.data
    base = decoder_forward(model.decoder2, x2, memory).data
    for t in range(10):
        y = x2.copy()
        y[t + 1:] += rng.normal(size=y[t + 1:].shape) * 5
        out = decoder_forward(model.decoder2, y, memory).data
        assert np.array_equal(out[:t + 1], base[:t + 1])
        if t < 9:
            assert not np.array_equal(out[t + 1:], base[t + 1:])


# -- checkpoints -------------------------------------------------------------------

def trained_like(cfg):
    model = DuetModel(cfg, seed=7)
    rng = np.random.default_rng(8)
    model.norm_stats = NormStats(rng.normal(size=(4, 3)), rng.uniform(0.5, 2, size=(4, 3)))
    for p in model.parameters():
        p.values = p.data + rng.normal(size=p.data.shape) * 1e-3
    return model


def test_checkpoint_round_trip(tmp_path):
    cfg = small_config()
    model = trained_like(cfg)
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path, meta={"epochs": 3})
    loaded = load_checkpoint(path)
    assert loaded.config == cfg
    for (n1, p1), (n2, p2) in zip(model.named_parameters(), loaded.named_parameters()):
        assert n1 == n2 and np.array_equal(p1.data, p2.data)
    assert np.array_equal(loaded.norm_stats.mean, model.norm_stats.mean)
    assert np.array_equal(loaded.norm_stats.std, model.norm_stats.std)
    x1, x2 = duet_data(cfg)
    a = duet_forward(model, x1, x2, "both", rng=np.random.default_rng(1))
    b = duet_forward(loaded, x1, x2, "both", rng=np.random.default_rng(1))
    for field in ("O1", "O2", "O3", "D1", "D2", "prediction"):
        assert np.array_equal(getattr(a, field).data, getattr(b, field).data)
    assert read_checkpoint_meta(path) == {"epochs": 3}
    assert dumps_checkpoint(loaded, {"epochs": 3}) == path.read_text()


def test_checkpoint_rejects_bad_files():
    model = trained_like(small_config())
    text = dumps_checkpoint(model)
    with pytest.raises(ParseError):
        loads_checkpoint("{")
    with pytest.raises(ParseError):
        loads_checkpoint(text.replace('"version": 1', '"version": 99'))
    with pytest.raises(ParseError):
        loads_checkpoint(text.replace("duetvae-checkpoint", "other"))
    doc = json.loads(text)
    name = next(iter(doc["params"]))
    doc["params"][name]["shape"] = [1, 1, 1]
    with pytest.raises(DimensionError):
        loads_checkpoint(json.dumps(doc))
    del doc["params"][name]
    with pytest.raises(ParseError):
        loads_checkpoint(json.dumps(doc))
