"""Matting Laplacian construction against a dense brute-force oracle."""

import numpy as np
import pytest

from photostyle import matting
from photostyle.errors import InputError, ShapeError

from conftest import numerical_grad, rel_err


def dense_laplacian_oracle(img, radius=1, eps=1e-7):
    """Direct per-window accumulation into a dense matrix."""
    h, w, _ = img.shape
    m = 2 * radius + 1
    wsz = m * m
    n = h * w
    dense = np.zeros((n, n))
    for wy in range(h - m + 1):
        for wx in range(w - m + 1):
            pix = [(wy + dy) * w + (wx + dx) for dy in range(m) for dx in range(m)]
            pts = img.reshape(n, 3)[pix]
            mu = pts.mean(axis=0)
            centered = pts - mu
            cov = centered.T @ centered / wsz
            inv = np.linalg.inv(cov + (eps / wsz) * np.eye(3))
            for a in range(wsz):
                for b in range(wsz):
                    q = centered[a] @ inv @ centered[b]
                    dense[pix[a], pix[b]] += (1.0 if a == b else 0.0) - (1.0 + q) / wsz
    return dense


class TestConstruction:
    def test_matches_dense_oracle(self, rng):
        for _ in range(5):
            img = rng.random((6, 6, 3))
            sparse = matting.build_matting_laplacian(img)
            dense = dense_laplacian_oracle(img)
            assert np.max(np.abs(sparse._csr.toarray() - dense)) < 1e-10

    def test_matches_oracle_rectangular(self, rng):
        img = rng.random((5, 8, 3))
        sparse = matting.build_matting_laplacian(img)
        dense = dense_laplacian_oracle(img)
        assert np.max(np.abs(sparse._csr.toarray() - dense)) < 1e-10

    def test_matches_oracle_radius_2(self, rng):
        img = rng.random((7, 7, 3))
        sparse = matting.build_matting_laplacian(img, window_radius=2)
        dense = dense_laplacian_oracle(img, radius=2)
        assert np.max(np.abs(sparse._csr.toarray() - dense)) < 1e-10

    def test_constant_image_in_null_space(self):
        img = np.full((6, 7, 3), 0.4)
        lap = matting.build_matting_laplacian(img)
        ones = np.ones(lap.n)
        assert np.max(np.abs(lap.matvec(ones))) < 1e-8
        assert abs(lap.quad(ones)) < 1e-8

    def test_row_sums_zero(self, rng):
        lap = matting.build_matting_laplacian(rng.random((8, 6, 3)))
        assert np.max(np.abs(lap.row_sums())) < 1e-8

    def test_nnz_per_row_bounded(self, rng):
        lap = matting.build_matting_laplacian(rng.random((10, 12, 3)))
        assert lap.max_row_nnz() <= 25
        assert lap.nnz <= 25 * lap.n

    def test_symmetry(self, rng):
        lap = matting.build_matting_laplacian(rng.random((9, 9, 3)))
        assert lap.symmetry_error() < 1e-10

    def test_psd_on_random_vectors(self, rng):
        lap = matting.build_matting_laplacian(rng.random((7, 7, 3)))
        for _ in range(100):
            v = rng.standard_normal(lap.n)
            v /= np.linalg.norm(v)
            assert lap.quad(v) >= -1e-8

    def test_too_small_image(self):
        with pytest.raises(ShapeError):
            matting.build_matting_laplacian(np.zeros((2, 5, 3)))

    def test_non_finite_rejected(self):
        img = np.zeros((5, 5, 3))
        img[2, 2, 1] = np.nan
        with pytest.raises(InputError):
            matting.build_matting_laplacian(img)


class TestAffineLoss:
    def test_constant_image_zero(self, rng):
        lap = matting.build_matting_laplacian(rng.random((6, 6, 3)))
        out = np.empty((6, 6, 3))
        out[:, :, 0] = 0.2
        out[:, :, 1] = 0.7
        out[:, :, 2] = 0.5
        assert abs(matting.affine_loss(lap, out)) < 1e-10

    def test_identity_is_eps_limited(self, rng):
        img = rng.random((8, 8, 3))
        lap = matting.build_matting_laplacian(img, eps=1e-7)
        assert matting.affine_loss(lap, img) <= 1e-4 * lap.n

    def test_matches_dense_quadratic_form(self, rng):
        img = rng.random((6, 6, 3))
        lap = matting.build_matting_laplacian(img)
        dense = dense_laplacian_oracle(img)
        out = rng.random((6, 6, 3))
        want = sum(out[:, :, c].ravel() @ dense @ out[:, :, c].ravel() for c in range(3))
        got = matting.affine_loss(lap, out)
        assert abs(got - want) / abs(want) < 1e-8

    def test_grad_constant_zero(self, rng):
        lap = matting.build_matting_laplacian(rng.random((5, 5, 3)))
        g = matting.affine_loss_grad(lap, np.full((5, 5, 3), 0.3))
        assert np.max(np.abs(g)) < 1e-8

    def test_grad_matches_finite_differences(self, rng):
        img = rng.random((5, 5, 3))
        lap = matting.build_matting_laplacian(img)
        out = rng.random((5, 5, 3))
        fd = numerical_grad(lambda v: matting.affine_loss(lap, v), out)
        assert rel_err(matting.affine_loss_grad(lap, out), fd) < 1e-3

    def test_grad_linear(self, rng):
        lap = matting.build_matting_laplacian(rng.random((5, 6, 3)))
        out = rng.random((5, 6, 3))
        np.testing.assert_allclose(
            matting.affine_loss_grad(lap, 3.0 * out),
            3.0 * matting.affine_loss_grad(lap, out),
            rtol=1e-12,
        )

    def test_dimension_mismatch(self, rng):
        lap = matting.build_matting_laplacian(rng.random((5, 5, 3)))
        with pytest.raises(ShapeError):
            matting.affine_loss(lap, rng.random((6, 5, 3)))
        with pytest.raises(ShapeError):
            matting.affine_loss_grad(lap, rng.random((4, 4, 3)))


class TestCache:
    def test_round_trip(self, rng, tmp_path):
        img = rng.random((6, 6, 3))
        lap = matting.build_matting_laplacian(img)
        path = tmp_path / "lap.matl"
        lap.save(path)
        loaded = matting.SparseSymmetricMatrix.load(path)
        assert loaded.n == lap.n and loaded.nnz == lap.nnz
        r1, c1, v1 = lap.triplets()
        r2, c2, v2 = loaded.triplets()
        np.testing.assert_array_equal(r1, r2)
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(v1, v2)

    def test_load_or_build_uses_cache(self, rng, tmp_path):
        img = rng.random((6, 6, 3))
        first = matting.load_or_build(img, cache_dir=tmp_path)
        files = list(tmp_path.glob("*.matl"))
        assert len(files) == 1
        again = matting.load_or_build(img, cache_dir=tmp_path)
        assert again.nnz == first.nnz
        assert list(tmp_path.glob("*.matl")) == files

    def test_key_depends_on_image(self, rng):
        a = rng.random((5, 5, 3))
        b = rng.random((5, 5, 3))
        assert matting.cache_key(a, 1, 1e-7) != matting.cache_key(b, 1, 1e-7)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "broken.matl"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(InputError):
            matting.SparseSymmetricMatrix.load(path)
