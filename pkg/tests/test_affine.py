import math

import numpy as np
import pytest

from osreg.geometry import (
    AffineParams,
    SingularTransformError,
    affine_from_params,
    compose_affine,
    invert_affine,
    read_affine_text,
    recenter_affine,
    shift_affine_frame,
    write_affine_text,
)


def random_paper_affine(rng):
    """Random transform within the production sampling bounds."""
    return affine_from_params(
        sx=rng.uniform(0.8, 1.2),
        sy=rng.uniform(0.8, 1.2),
        theta_deg=rng.uniform(-20, 20),
        tx=rng.uniform(-30, 30),
        ty=rng.uniform(-30, 30),
    )


def test_identity_construction_is_exact():
    phi = affine_from_params(1, 1, 0, 0, 0)
    assert np.array_equal(phi.mu, np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    assert phi == AffineParams.identity()


def test_quarter_turn():
    phi = affine_from_params(1, 1, 90, 0, 0)
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(phi.mu, expected, atol=1e-15)


def test_general_entries_match_scalar_trig():
    # Independent per-entry evaluation of the matrix definition.
    sx, sy, theta, tx, ty = 1.2, 0.9, 20.0, 30.0, -15.0
    phi = affine_from_params(sx, sy, theta, tx, ty)
    rad = math.radians(theta)
    expected = np.array(
        [
            [sx * math.cos(rad), -sx * math.sin(rad), tx],
            [sy * math.sin(rad), sy * math.cos(rad), ty],
        ]
    )
    np.testing.assert_allclose(phi.mu, expected, rtol=0, atol=1e-15)


@pytest.mark.parametrize("sx,sy", [(0.0, 1.0), (-0.5, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_nonpositive_scale_rejected(sx, sy):
    with pytest.raises(ValueError):
        affine_from_params(sx, sy, 0, 0, 0)


def test_affine_params_validation():
    with pytest.raises(ValueError):
        AffineParams(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        AffineParams(np.array([[np.nan, 0, 0], [0, 1, 0]]))
    with pytest.raises(SingularTransformError):
        AffineParams(np.array([[1.0, 2.0, 0.0], [0.5, 1.0, 0.0]]))  # det = 0


def test_invert_identity_and_translation():
    ident = AffineParams.identity()
    assert invert_affine(ident) == ident
    trans = affine_from_params(1, 1, 0, 7.5, -3.25)
    inv = invert_affine(trans)
    np.testing.assert_allclose(inv.translation, [-7.5, 3.25], atol=1e-15)
    np.testing.assert_allclose(inv.linear, np.eye(2), atol=1e-15)


def test_invert_matches_homogeneous_matrix_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        phi = random_paper_affine(rng)
        oracle = np.linalg.inv(phi.as_homogeneous())[:2]
        np.testing.assert_allclose(invert_affine(phi).mu, oracle, atol=1e-10)
        composed = compose_affine(phi, invert_affine(phi))
        np.testing.assert_allclose(composed.mu, AffineParams.identity().mu, atol=1e-10)
        composed = compose_affine(invert_affine(phi), phi)
        np.testing.assert_allclose(composed.mu, AffineParams.identity().mu, atol=1e-10)


def test_compose_identity_and_translations():
    rng = np.random.default_rng(3)
    phi = random_paper_affine(rng)
    ident = AffineParams.identity()
    np.testing.assert_allclose(compose_affine(ident, phi).mu, phi.mu, atol=0)
    np.testing.assert_allclose(compose_affine(phi, ident).mu, phi.mu, atol=0)

    a = affine_from_params(1, 1, 0, 2, 3)
    b = affine_from_params(1, 1, 0, -5, 7)
    np.testing.assert_allclose(compose_affine(a, b).translation, [-3, 10], atol=1e-15)


def test_compose_matches_matrix_product_oracle():
    rng = np.random.default_rng(29)
    for _ in range(100):
        a, b = random_paper_affine(rng), random_paper_affine(rng)
        oracle = (a.as_homogeneous() @ b.as_homogeneous())[:2]
        np.testing.assert_allclose(compose_affine(a, b).mu, oracle, atol=1e-12)
        # Point-wise meaning: a applied after b.
        pts = rng.uniform(-50, 50, size=(10, 2))
        np.testing.assert_allclose(compose_affine(a, b).apply(pts), a.apply(b.apply(pts)), atol=1e-9)


def test_recenter_pivots_about_point():
    phi = affine_from_params(1.1, 0.9, 15, 4, -2)
    pivot = (31.5, 47.5)
    cen = recenter_affine(phi, pivot)
    # The pivot moves only by the translation.
    np.testing.assert_allclose(cen.apply(np.array([pivot])), [np.array(pivot) + phi.translation], atol=1e-12)
    np.testing.assert_allclose(cen.linear, phi.linear, atol=0)


def test_shift_frame_consistent_with_offset():
    rng = np.random.default_rng(5)
    phi = random_paper_affine(rng)
    off = (56.0, 56.0)
    shifted = shift_affine_frame(phi, off)
    pts = rng.uniform(0, 100, size=(20, 2))
    np.testing.assert_allclose(shifted.apply(pts - off), phi.apply(pts) - off, atol=1e-10)


def test_affine_text_roundtrip(tmp_path):
    rng = np.random.default_rng(17)
    phi = random_paper_affine(rng)
    path = tmp_path / "phi.txt"
    write_affine_text(path, phi)
    assert read_affine_text(path) == phi
    with open(path) as f:
        assert len(f.read().split()) == 6
    (tmp_path / "bad.txt").write_text("1 2 3\n")
    with pytest.raises(ValueError):
        read_affine_text(tmp_path / "bad.txt")
