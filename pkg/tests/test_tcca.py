import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gptcca.errors import ContractError, RankError, ShapeError
from gptcca.gp import gp_decompose
from gptcca.tcca import (MultiViewDataset, TCCAModel, TCCAOptions, correlation_tensor,
                         data_tensor, higher_order_correlation, synth_multiview,
                         synth_multiview_with_truth, tcca_fit, tcca_project, view_covariance)
from gptcca.tensor import (CPDecomposition, cp_to_tensor, multilinear_form, outer,
                           relative_residual)


@pytest.fixture(scope="module")
def planted():
    return synth_multiview(200, 3, (12, 10, 8), 4, 0.1, 0)


@pytest.fixture(scope="module")
def planted_model(planted):
    return tcca_fit(planted, 4, TCCAOptions(seed=0))


def random_views(seed, N=30, dims=(4, 3, 5)):
    rng = np.random.default_rng(seed)
    return MultiViewDataset([rng.standard_normal((N, n)) for n in dims])


class TestDataset:
    def test_properties(self):
        D = random_views(0)
        assert (D.n_samples, D.n_views, D.dims) == (30, 3, (4, 3, 5))
        assert D.subset([0, 2]).n_samples == 2

    def test_invalid(self):
        with pytest.raises(ContractError):
            MultiViewDataset([np.ones((3, 2))])
        with pytest.raises(ShapeError):
            MultiViewDataset([np.ones((3, 2)), np.ones((4, 2))])


class TestViewCovariance:
    def test_single_sample(self):
        y = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(view_covariance(y[None, :]), np.outer(y, y))

    def test_signed_unit_rows(self):
        Y = np.array([[1.0, 0, 0], [-1.0, 0, 0]])
        np.testing.assert_array_equal(view_covariance(Y), np.diag([1.0, 0, 0]))

    def test_centered_constant(self):
        Y = np.tile([2.0, -1.0, 5.0], (6, 1))
        np.testing.assert_allclose(view_covariance(Y, center=True), 0, atol=1e-15)

    def test_matches_numpy_cov(self):
        Y = np.random.default_rng(0).standard_normal((40, 4))
        np.testing.assert_allclose(view_covariance(Y, center=True),
                                   np.cov(Y, rowvar=False, bias=True), rtol=1e-12)


class TestDataTensor:
    def test_one_sample(self):
        D = random_views(1, N=1)
        expected = outer(*(Y[0] for Y in D.views)).data
        np.testing.assert_allclose(data_tensor(D).data, expected, rtol=1e-15, atol=1e-15)

    def test_cancellation(self):
        rows = [np.random.default_rng(2).standard_normal(n) for n in (3, 4, 2)]
        D = MultiViewDataset([np.stack([y, -y]) for y in rows])
        np.testing.assert_allclose(data_tensor(D).data, 0, atol=1e-15)

    def test_two_samples_as_cp(self):
        D = random_views(3, N=2)
        expected = sum(cp_to_tensor(CPDecomposition([Y[i][:, None] for Y in D.views])).data
                       for i in range(2))
        np.testing.assert_allclose(data_tensor(D).data, expected, rtol=1e-13)

    def test_chunking_matches_einsum(self, monkeypatch):
        import gptcca.tcca as tcca
        D = random_views(4, N=50, dims=(3, 4, 2, 3))
        full = np.einsum("ia,ib,ic,id->abcd", *D.views)
        monkeypatch.setattr(tcca, "_CHUNK_ENTRIES", 7)
        np.testing.assert_allclose(data_tensor(D).data, full, rtol=1e-12, atol=1e-12)

    def test_centering(self):
        D = random_views(5)
        centered = MultiViewDataset([Y - Y.mean(axis=0) for Y in D.views])
        np.testing.assert_allclose(data_tensor(D, center=True).data,
                                   data_tensor(centered).data, atol=1e-12)


class TestCorrelationTensor:
    def test_white_data(self):
        # rows +-sqrt(n) e_k give C_j = I exactly
        n = 3
        Y = np.sqrt(n) * np.vstack([np.eye(n), -np.eye(n)])
        D = MultiViewDataset([Y, Y.copy()])
        M, whiteners, _ = correlation_tensor(D, TCCAOptions(eps=0.0))
        for W in whiteners:
            np.testing.assert_allclose(W, np.eye(n), atol=1e-14)
        np.testing.assert_allclose(M.data, data_tensor(D).data, atol=1e-13)

    def test_two_views_matrix_identity(self):
        D = random_views(6, dims=(4, 5))
        M, (W1, W2), _ = correlation_tensor(D)
        C = D.views[0].T @ D.views[1]
        np.testing.assert_allclose(M.data, W1 @ C @ W2, rtol=1e-12, atol=1e-12)

    def test_shape_and_default_eps(self):
        D = random_views(7)
        M, _, eps = correlation_tensor(D)
        assert M.shape == D.dims
        for Y, e in zip(D.views, eps):
            assert e == pytest.approx(1e-8 * np.trace(view_covariance(Y)) / Y.shape[1])

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_whitening_identity(self, seed):
        D = random_views(seed, N=25, dims=(3, 4, 2))
        _, whiteners, _ = correlation_tensor(D, TCCAOptions(eps=0.0))
        for Y, W in zip(D.views, whiteners):
            Z = Y @ W
            np.testing.assert_allclose(Z.T @ Z / Y.shape[0], np.eye(W.shape[0]), atol=1e-8)


class TestFit:
    def test_planted_reconstruction(self):
        D = synth_multiview(500, 3, (4, 4, 4), 4, 0.05, 1)
        model = tcca_fit(D, 4)
        M, _, _ = correlation_tensor(D)
        assert relative_residual(M, model.cp) <= 0.05
        assert model.refined_residual == pytest.approx(relative_residual(M, model.cp))
        assert model.refined_residual <= model.gp_residual

    def test_rank_too_large(self):
        with pytest.raises(RankError):
            tcca_fit(random_views(0), 6)

    def test_projection_normalization(self, planted, planted_model):
        for Y, P in zip(planted.views, planted_model.projections):
            np.testing.assert_allclose(np.diag(P.T @ view_covariance(Y) @ P), 1.0, atol=1e-8)

    def test_model_structure(self, planted_model):
        m = planted_model
        for W, U, P in zip(m.whiteners, m.cp.factors, m.projections):
            np.testing.assert_allclose(P, W @ U, rtol=1e-14)
            np.testing.assert_allclose(np.linalg.norm(U, axis=0), 1.0, rtol=1e-12)
        assert np.all(m.cp.weights >= 0)
        assert m.dims == (12, 10, 8)

    def test_rho_consistency(self, planted, planted_model):
        M, _, _ = correlation_tensor(planted)
        cp = planted_model.cp
        direct = sum(multilinear_form(M, [U[:, s] for U in cp.factors]) for s in range(4))
        rho = higher_order_correlation(tcca_project(planted_model, planted))
        assert rho == pytest.approx(direct, rel=1e-8)
        # the same form evaluated on the CP model instead of M
        gram = np.prod([U.T @ U for U in cp.factors], axis=0)
        model_form = float(np.sum(gram @ cp.weights))
        assert model_form == pytest.approx(float(np.sum(
            [multilinear_form(cp_to_tensor(cp), [U[:, s] for U in cp.factors]) for s in range(4)])),
            rel=1e-8)

    def test_determinism(self, planted):
        a = tcca_fit(planted, 3, TCCAOptions(seed=5))
        b = tcca_fit(planted, 3, TCCAOptions(seed=5))
        for Pa, Pb in zip(a.projections, b.projections):
            assert Pa.tobytes() == Pb.tobytes()

    def test_sample_permutation_invariance(self, planted, planted_model):
        perm = np.random.default_rng(0).permutation(planted.n_samples)
        shuffled = planted.subset(perm)
        for Y, Z in zip(planted.views, shuffled.views):
            np.testing.assert_allclose(view_covariance(Z), view_covariance(Y), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(data_tensor(shuffled).data, data_tensor(planted).data,
                                   rtol=1e-12, atol=1e-10)
        refit = tcca_fit(shuffled, 4, TCCAOptions(seed=0))
        for Pa, Pb in zip(refit.projections, planted_model.projections):
            np.testing.assert_allclose(Pa, Pb, atol=1e-6)

    def test_centered_fit(self):
        D = synth_multiview(100, 3, (5, 4, 3), 2, 0.1, 3)
        shifted = MultiViewDataset([Y + 10.0 for Y in D.views])
        a = tcca_fit(D, 2, TCCAOptions(center=True))
        b = tcca_fit(shifted, 2, TCCAOptions(center=True))
        np.testing.assert_allclose(tcca_project(a, D)[0], tcca_project(b, shifted)[0], atol=1e-6)


def _identity_model(dims, r):
    eye = tuple(np.eye(n) for n in dims)
    proj = tuple(np.eye(n)[:, :r] for n in dims)
    cp = CPDecomposition(proj)
    return TCCAModel(r, eye, proj, cp, None, TCCAOptions(), (0.0,) * len(dims))


class TestProject:
    def test_coordinate_selection(self):
        D = random_views(0)
        Z = tcca_project(_identity_model(D.dims, 2), D)
        for Y, Zj in zip(D.views, Z):
            np.testing.assert_array_equal(Zj, Y[:, :2])

    def test_zero_data(self):
        D = MultiViewDataset([np.zeros((4, n)) for n in (4, 3, 5)])
        assert all(not np.any(Zj) for Zj in tcca_project(_identity_model(D.dims, 2), D))

    def test_shapes(self, planted, planted_model):
        assert [Z.shape for Z in tcca_project(planted_model, planted)] == [(200, 4)] * 3

    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            tcca_project(_identity_model((4, 3, 5), 2), random_views(0, dims=(4, 3, 4)))


class TestHigherOrderCorrelation:
    def test_all_ones(self):
        assert higher_order_correlation([np.ones((7, 3))] * 3) == 21.0

    def test_two_views_trace(self):
        rng = np.random.default_rng(0)
        Z1, Z2 = rng.standard_normal((10, 3)), rng.standard_normal((10, 3))
        assert higher_order_correlation([Z1, Z2]) == pytest.approx(np.trace(Z1.T @ Z2), rel=1e-13)

    def test_zero_view(self):
        Z = np.random.default_rng(1).standard_normal((5, 2))
        assert higher_order_correlation([Z, np.zeros((5, 2)), Z]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            higher_order_correlation([np.ones((3, 2)), np.ones((3, 3))])


class TestSynth:
    def test_noiseless_rank_one_views(self):
        D = synth_multiview(20, 3, (4, 3, 5), 1, 0.0, 0)
        assert all(np.linalg.matrix_rank(Y) == 1 for Y in D.views)

    def test_determinism(self):
        a = synth_multiview(10, 3, (3, 3, 3), 2, 0.1, 7)
        b = synth_multiview(10, 3, (3, 3, 3), 2, 0.1, 7)
        assert all(np.array_equal(x, y) for x, y in zip(a.views, b.views))

    @pytest.mark.parametrize("seed", range(3))
    def test_noiseless_tensor_has_planted_rank(self, seed):
        D, loadings, codes = synth_multiview_with_truth(60, 3, (6, 5, 4), 3, 0.0, seed)
        C = data_tensor(D)
        assert relative_residual(C, gp_decompose(C, 3)) <= 1e-6

    def test_invalid(self):
        with pytest.raises(ContractError):
            synth_multiview(10, 3, (3, 3), 2, 0.1, 0)
        with pytest.raises(ContractError):
            synth_multiview(10, 3, (3, 3, 2), 3, 0.1, 0)
