import numpy as np
import pytest
import torch

from osreg.geometry import (
    AffineParams,
    DegenerateSupportError,
    FlowField,
    affine_from_params,
    flow_from_affine,
    flow_from_affine_tensor,
    lsr_fit,
    lsr_fit_tensor,
    pixel_grid,
)


def pinv_oracle(flow_hw2, mask=None):
    """Independent normal-equation solve on raw pixel coordinates."""
    h, w = flow_hw2.shape[:2]
    coords = pixel_grid(h, w).coords
    rhs = flow_hw2.reshape(-1, 2)
    if mask is not None:
        keep = mask.reshape(-1)
        coords, rhs = coords[keep], rhs[keep]
    delta = (np.linalg.pinv(coords) @ rhs).T
    return delta + AffineParams.identity().mu


def random_paper_affine(rng):
    return affine_from_params(
        rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2),
        rng.uniform(-20, 20), rng.uniform(-30, 30), rng.uniform(-30, 30),
    )


def test_zero_flow_gives_identity():
    fit = lsr_fit(FlowField.zeros(16, 16))
    np.testing.assert_allclose(fit.mu, AffineParams.identity().mu, atol=1e-14)


def test_roundtrip_recovers_affine():
    rng = np.random.default_rng(42)
    for _ in range(100):
        phi = random_paper_affine(rng)
        fit = lsr_fit(flow_from_affine(phi, 64, 64))
        assert np.abs(fit.mu - phi.mu).max() <= 1e-6


@pytest.mark.parametrize("h,w", [(8, 8), (8, 33), (57, 8)])
def test_roundtrip_all_sizes_at_least_8(h, w):
    rng = np.random.default_rng(h * 100 + w)
    for _ in range(20):
        phi = random_paper_affine(rng)
        fit = lsr_fit(flow_from_affine(phi, h, w))
        assert np.abs(fit.mu - phi.mu).max() <= 1e-6


def test_noisy_fit_matches_pinv_oracle():
    rng = np.random.default_rng(7)
    for _ in range(30):
        phi = random_paper_affine(rng)
        flow = flow_from_affine(phi, 48, 40)
        noisy = flow.data + rng.normal(scale=0.5, size=flow.data.shape)
        fit = lsr_fit(FlowField(noisy, flow.valid))
        oracle = pinv_oracle(noisy)
        rel = np.abs(fit.mu - oracle) / np.maximum(np.abs(oracle), 1.0)
        assert rel.max() <= 1e-5


def test_masked_fit_matches_masked_oracle():
    rng = np.random.default_rng(13)
    phi = random_paper_affine(rng)
    flow = flow_from_affine(phi, 32, 32)
    noisy = flow.data + rng.normal(scale=0.3, size=flow.data.shape)
    mask = rng.uniform(size=(32, 32)) > 0.4
    fit = lsr_fit(FlowField(noisy, flow.valid), mask=mask)
    oracle = pinv_oracle(noisy, mask=mask)
    np.testing.assert_allclose(fit.mu, oracle, atol=1e-9)


def test_linearity_in_flow():
    rng = np.random.default_rng(23)
    f1 = rng.normal(size=(24, 24, 2))
    f2 = rng.normal(size=(24, 24, 2))
    a, b = 1.7, -0.6
    ident = AffineParams.identity().mu
    lhs = lsr_fit(a * f1 + b * f2).mu - ident
    rhs = a * (lsr_fit(f1).mu - ident) + b * (lsr_fit(f2).mu - ident)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_outlier_suppression():
    # Corrupting <=1% of pixels moves the fitted transform's induced flow by
    # less (in mean endpoint error) than the corruption's own mean magnitude.
    rng = np.random.default_rng(31)
    h = w = 64
    phi = random_paper_affine(rng)
    clean = flow_from_affine(phi, h, w)
    n_bad = int(0.01 * h * w)
    idx = rng.choice(h * w, size=n_bad, replace=False)
    noise = np.zeros((h * w, 2))
    noise[idx] = rng.uniform(-2.0, 2.0, size=(n_bad, 2))
    corrupted = clean.data + noise.reshape(h, w, 2)

    fit = lsr_fit(FlowField(corrupted, clean.valid))
    induced = flow_from_affine(fit, h, w)
    change = np.sqrt(((induced.data - clean.data) ** 2).sum(axis=2)).mean()
    corruption = np.sqrt((noise**2).sum(axis=1)).mean()
    assert change < corruption


def test_degenerate_support_too_few_pixels():
    flow = FlowField.zeros(8, 8)
    mask = np.zeros((8, 8), dtype=bool)
    mask[0, 0] = mask[3, 3] = True
    with pytest.raises(DegenerateSupportError):
        lsr_fit(flow, mask=mask)


def test_degenerate_support_collinear():
    flow = FlowField.zeros(8, 8)
    mask = np.zeros((8, 8), dtype=bool)
    mask[2, :] = True  # one image row: x varies, y constant
    with pytest.raises(DegenerateSupportError):
        lsr_fit(flow, mask=mask)


def test_tensor_fit_agrees_with_numpy():
    rng = np.random.default_rng(3)
    flow = rng.normal(scale=4, size=(20, 28, 2))
    mask = rng.uniform(size=(20, 28)) > 0.3
    np_fit = lsr_fit(FlowField(flow * mask[..., None], mask), mask=None).mu
    t_flow = torch.tensor(np.moveaxis(flow * mask[..., None], -1, 0))
    t_fit = lsr_fit_tensor(t_flow, valid=torch.tensor(mask))
    np.testing.assert_allclose(t_fit.numpy(), np_fit, atol=1e-10)


def test_tensor_fit_batched():
    rng = np.random.default_rng(4)
    flows, expected = [], []
    for _ in range(5):
        phi = random_paper_affine(rng)
        flows.append(np.moveaxis(flow_from_affine(phi, 16, 16).data, -1, 0))
        expected.append(phi.mu)
    batch = torch.tensor(np.stack(flows))
    fit = lsr_fit_tensor(batch)
    np.testing.assert_allclose(fit.numpy(), np.stack(expected), atol=1e-8)


def test_tensor_fit_subsampled_grid_units():
    # Fitting an exact affine flow sampled every 8th pixel, expressed in
    # full-resolution units, recovers the same transform.
    phi = affine_from_params(1.1, 0.95, 12, 20, -10)
    full = flow_from_affine(phi, 64, 64)
    sub = full.data[3::8, 3::8]  # representative cell centers at 8*k + 3
    t = torch.tensor(np.moveaxis(sub, -1, 0))
    fit = lsr_fit_tensor(t, origin=(3.0, 3.0), step=8.0)
    np.testing.assert_allclose(fit.numpy(), phi.mu, atol=1e-8)


def test_flow_from_affine_tensor_matches_numpy():
    phi = affine_from_params(1.05, 0.9, -7, 2, 5)
    t = flow_from_affine_tensor(torch.tensor(phi.mu), 12, 18)
    np.testing.assert_allclose(
        np.moveaxis(t.numpy(), 0, -1), flow_from_affine(phi, 12, 18).data, atol=1e-12
    )


def test_gradients_match_finite_differences():
    torch.manual_seed(0)
    flow = torch.randn(2, 16, 16, dtype=torch.float64) * 3
    weights = torch.randn(2, 3, dtype=torch.float64)

    def loss_fn(f):
        return (lsr_fit_tensor(f) * weights).sum()

    flow.requires_grad_(True)
    loss_fn(flow).backward()
    analytic = flow.grad.clone()

    eps = 1e-6
    rng = np.random.default_rng(8)
    for _ in range(24):
        c = int(rng.integers(2)); i = int(rng.integers(16)); j = int(rng.integers(16))
        fp = flow.detach().clone(); fp[c, i, j] += eps
        fm = flow.detach().clone(); fm[c, i, j] -= eps
        numeric = (loss_fn(fp) - loss_fn(fm)).item() / (2 * eps)
        denom = max(abs(numeric), abs(analytic[c, i, j].item()), 1e-8)
        assert abs(analytic[c, i, j].item() - numeric) / denom <= 1e-4


def test_gradcheck_full():
    torch.manual_seed(1)
    flow = torch.randn(2, 8, 8, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(
        lambda f: lsr_fit_tensor(f).sum(), (flow,), eps=1e-6, atol=1e-6
    )
