import numpy as np
import pytest
import torch

from osreg.geometry import lsr_fit_tensor
from osreg.model import (
    ConvEncoder,
    CorrelationPyramid,
    ModelConfig,
    RegistrationNetwork,
    convex_upsample,
    coords_grid,
    count_parameters,
    load_checkpoint,
    save_checkpoint,
    write_attention_sidecar,
)


@pytest.fixture(scope="module")
def toy_net():
    torch.manual_seed(0)
    return RegistrationNetwork(ModelConfig.toy()).eval()


def test_encoder_output_shape():
    enc = ConvEncoder((8, 12, 16), 24)
    out = enc(torch.randn(2, 3, 96, 96))
    assert out.shape == (2, 24, 12, 12)


def test_shared_weights_identical_features(toy_net):
    x = torch.rand(1, 3, 96, 96)
    with torch.no_grad():
        a, b = toy_net.fnet(x), toy_net.fnet(x)
    torch.testing.assert_close(a, b, rtol=0, atol=0)


def test_encoder_shift_equivariance_probe():
    torch.manual_seed(3)
    enc = ConvEncoder((24, 32, 48), 64).eval()
    img = torch.rand(1, 3, 256, 320)
    with torch.no_grad():
        fa = enc(img[..., :, 0:256])
        fb = enc(img[..., :, 8:264])
    m = 12  # cells clear of border effects
    aligned = (fb[..., m:-m, m : -m - 1] - fa[..., m:-m, m + 1 : -m]).abs().mean()
    unaligned = (fb[..., m:-m, m : -m - 1] - fa[..., m:-m, m : -m - 1]).abs().mean()
    scale = fa.abs().mean()
    assert aligned / scale < 0.06
    assert unaligned / aligned > 5


def test_encoder_pretrained_partial_load():
    enc = ConvEncoder((8, 12, 16), 24)
    donor = ConvEncoder((8, 12, 16), 24)
    state = dict(donor.state_dict())
    state["unrelated.weight"] = torch.zeros(3)
    n = enc.load_pretrained(state)
    assert n == len(donor.state_dict())
    torch.testing.assert_close(enc.stem[0].weight, donor.stem[0].weight)


def test_corr_diagonal_is_maximum_for_normalized_features():
    torch.manual_seed(1)
    f = torch.randn(1, 16, 4, 4)
    f = f / f.norm(dim=1, keepdim=True)
    pyr = CorrelationPyramid(f, f, num_levels=1, radius=1)
    corr = pyr.levels[0].reshape(16, 16)  # [source cell, target cell]
    assert torch.equal(corr.argmax(dim=1), torch.arange(16))


def test_corr_2x2_single_channel_outer_product():
    a = torch.tensor([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
    b = torch.tensor([[5.0, 6.0], [7.0, 8.0]]).reshape(1, 1, 2, 2)
    pyr = CorrelationPyramid(a, b, num_levels=1, radius=1)
    corr = pyr.levels[0].reshape(4, 4)
    expected = torch.outer(torch.tensor([1.0, 2, 3, 4]), torch.tensor([5.0, 6, 7, 8]))
    torch.testing.assert_close(corr, expected, rtol=0, atol=1e-6)  # C=1: scale 1/sqrt(1)


def test_corr_pooled_levels_average_2x2_blocks():
    torch.manual_seed(2)
    f1 = torch.randn(1, 8, 8, 8)
    f2 = torch.randn(1, 8, 8, 8)
    pyr = CorrelationPyramid(f1, f2, num_levels=2, radius=1)
    lvl0 = pyr.levels[0]
    lvl1 = pyr.levels[1]
    manual = lvl0.reshape(64, 1, 4, 2, 4, 2).mean(dim=(3, 5)).reshape(64, 1, 4, 4)
    torch.testing.assert_close(lvl1, manual, rtol=0, atol=1e-6)


def test_corr_rejects_mismatched_features():
    with pytest.raises(ValueError):
        CorrelationPyramid(torch.zeros(1, 8, 4, 4), torch.zeros(1, 9, 4, 4))


def test_lookup_zero_flow_centered_on_diagonal():
    torch.manual_seed(3)
    f = torch.randn(1, 16, 6, 6)
    f = f / f.norm(dim=1, keepdim=True)
    pyr = CorrelationPyramid(f, f, num_levels=1, radius=2)
    coords = coords_grid(1, 6, 6, "cpu", torch.float32)
    feats = pyr.lookup(coords)
    center_channel = 2 * 5 + 2  # middle of the 5x5 window
    diag = pyr.levels[0].reshape(36, 36).diagonal().reshape(6, 6)
    torch.testing.assert_close(feats[0, center_channel], diag, rtol=0, atol=1e-5)


def test_lookup_integer_coords_match_direct_indexing():
    torch.manual_seed(4)
    f1 = torch.randn(1, 4, 8, 8)
    f2 = torch.randn(1, 4, 8, 8)
    pyr = CorrelationPyramid(f1, f2, num_levels=1, radius=1)
    volume = pyr.levels[0].reshape(8, 8, 8, 8)  # [y1, x1, y2, x2]

    coords = coords_grid(1, 8, 8, "cpu", torch.float32)
    coords = coords + torch.tensor([2.0, 3.0]).view(1, 2, 1, 1)  # integer offsets
    feats = pyr.lookup(coords)

    y1, x1 = 2, 1
    tx, ty = x1 + 2, y1 + 3
    window = feats[0, :, y1, x1].reshape(3, 3)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            expected = volume[y1, x1, ty + dy, tx + dx]
            torch.testing.assert_close(window[dy + 1, dx + 1], expected, rtol=0, atol=1e-5)


def test_lookup_matches_brute_force_gather():
    torch.manual_seed(5)
    f1 = torch.randn(1, 4, 4, 4)
    f2 = torch.randn(1, 4, 4, 4)
    pyr = CorrelationPyramid(f1, f2, num_levels=1, radius=1)
    volume = pyr.levels[0].reshape(4, 4, 4, 4)

    rng = np.random.default_rng(0)
    coords = coords_grid(1, 4, 4, "cpu", torch.float32)
    jitter = torch.tensor(rng.uniform(-0.9, 0.9, size=(1, 2, 4, 4)), dtype=torch.float32)
    coords = coords + jitter
    feats = pyr.lookup(coords)

    def sample(vol2d, x, y):
        # Bilinear with zero padding outside [0, 3].
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        total = 0.0
        for yy, wy in ((y0, 1 - (y - y0)), (y0 + 1, y - y0)):
            for xx, wx in ((x0, 1 - (x - x0)), (x0 + 1, x - x0)):
                if 0 <= xx < 4 and 0 <= yy < 4:
                    total += float(vol2d[yy, xx]) * wy * wx
        return total

    for y1 in range(4):
        for x1 in range(4):
            cx = float(coords[0, 0, y1, x1])
            cy = float(coords[0, 1, y1, x1])
            window = feats[0, :, y1, x1].reshape(3, 3)
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    expected = sample(volume[y1, x1], cx + dx, cy + dy)
                    assert abs(float(window[dy + 1, dx + 1]) - expected) < 1e-5


def test_convex_upsample_constant_flow_stays_constant():
    flow = torch.zeros(2, 2, 4, 4)
    flow[:, 0] = 1.25
    flow[:, 1] = -0.5
    mask = torch.randn(2, 9 * 64, 4, 4) * 3
    up = convex_upsample(flow, mask)
    assert up.shape == (2, 2, 32, 32)
    torch.testing.assert_close(up[:, 0], torch.full((2, 32, 32), 8 * 1.25), rtol=0, atol=1e-5)
    torch.testing.assert_close(up[:, 1], torch.full((2, 32, 32), 8 * -0.5), rtol=0, atol=1e-5)


def test_forward_single_iteration_lengths(toy_net):
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with torch.no_grad():
        out = toy_net(opt, sar, n_iters=1, mode="lsr")
    assert len(out.flows) == 1 and len(out.phis) == 1
    assert out.flows[0].shape == (1, 2, 96, 96)
    assert out.phis[0].shape == (1, 2, 3)


def test_forward_mode_none_and_ls_share_flows(toy_net):
    torch.manual_seed(6)
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with torch.no_grad():
        out_none = toy_net(opt, sar, n_iters=3, mode="none")
        out_ls = toy_net(opt, sar, n_iters=3, mode="ls")
    assert out_none.phis == []
    assert len(out_ls.phis) == 3
    for a, b in zip(out_none.flows, out_ls.flows):
        torch.testing.assert_close(a, b, rtol=0, atol=0)


def test_forward_head_consistency(toy_net):
    # phis[i] must equal the least-squares fit of flows[i], untrained weights included.
    torch.manual_seed(7)
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with torch.no_grad():
        out = toy_net(opt, sar, n_iters=4, mode="lsr")
    for flow, phi in zip(out.flows, out.phis):
        refit = lsr_fit_tensor(flow)
        torch.testing.assert_close(phi, refit, rtol=0, atol=1e-5)


def test_forward_deterministic_in_eval(toy_net):
    torch.manual_seed(8)
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with torch.no_grad():
        a = toy_net(opt, sar, n_iters=2, mode="none")
        b = toy_net(opt, sar, n_iters=2, mode="none")
    torch.testing.assert_close(a.final_flow, b.final_flow, rtol=0, atol=0)


def test_forward_pads_and_crops_odd_sizes(toy_net):
    opt = torch.rand(1, 3, 90, 70)
    sar = torch.rand(1, 1, 90, 70)
    with torch.no_grad():
        out = toy_net(opt, sar, n_iters=1, mode="none")
    assert out.final_flow.shape == (1, 2, 90, 70)


def test_forward_input_validation(toy_net):
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with pytest.raises(ValueError):
        toy_net(opt, sar, n_iters=0)
    with pytest.raises(ValueError):
        toy_net(opt, sar, mode="bogus")
    with pytest.raises(ValueError):
        toy_net(opt, torch.rand(1, 1, 64, 96))


def test_forward_lsr_resolution_eighth_close_to_full():
    torch.manual_seed(9)
    cfg_full = ModelConfig.toy()
    net = RegistrationNetwork(cfg_full).eval()
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with torch.no_grad():
        out_full = net(opt, sar, n_iters=2, mode="lsr")
        net.cfg.lsr_resolution = "eighth"
        out_eighth = net(opt, sar, n_iters=2, mode="lsr")
    net.cfg.lsr_resolution = "full"
    # Same linear structure; differs only through upsampling detail.
    torch.testing.assert_close(out_full.phis[-1], out_eighth.phis[-1], rtol=0, atol=0.3)


def test_checkpoint_roundtrip(tmp_path, toy_net):
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, toy_net, step=123, extra={"note": "unit"})
    restored, payload = load_checkpoint(path)
    assert payload["step"] == 123
    assert payload["extra"]["note"] == "unit"
    assert restored.cfg == toy_net.cfg
    for (ka, va), (kb, vb) in zip(restored.state_dict().items(), toy_net.state_dict().items()):
        assert ka == kb
        torch.testing.assert_close(va, vb, rtol=0, atol=0)
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with torch.no_grad():
        torch.testing.assert_close(
            restored(opt, sar, 1, "none").final_flow,
            toy_net(opt, sar, 1, "none").final_flow,
            rtol=0,
            atol=0,
        )


def test_attention_export_and_sidecar(tmp_path, toy_net):
    opt = torch.rand(1, 3, 96, 96)
    sar = torch.rand(1, 1, 96, 96)
    with torch.no_grad():
        out = toy_net(opt, sar, n_iters=1, mode="none", export_attention=True)
    assert out.attention and len(out.attention) == 4
    flow_stub = tmp_path / "pair.gflw"
    flow_stub.write_bytes(b"")
    sidecar = write_attention_sidecar(flow_stub, out.attention)
    assert sidecar.name == "pair.gflw.attn.npz"
    loaded = np.load(sidecar)
    assert set(loaded.files) == set(out.attention)
    for key in loaded.files:
        np.testing.assert_allclose(loaded[key], out.attention[key].numpy(), atol=1e-6)


def test_parameter_count_positive(toy_net):
    assert count_parameters(toy_net) > 100_000
