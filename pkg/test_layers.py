"""
MPO layers: planned forward pass, analytic gradients, compression accounting,
equivalence-preserving growth and the regression training loop.
"""
import numpy as np
import pytest

from TNZ_CORE.exceptions import DecompositionError, IndexMismatchError, TensorNetworkError, TrainingDivergedError
from decompositions.models import MPO
from decompositions.services.chain import matrix_to_mpo, mpo_recompress, mpo_to_matrix, random_mpo
from layers.models import Batch, BondGrowthPolicy, MpoLinearLayer
from layers.services.backward import mpo_backward
from layers.services.compression import compression_report
from layers.services.forward import dense_forward, mpo_forward, sequential_order
from layers.services.scaling import bond_inflate, insert_site
from layers.services.training import mse_loss, train_mpo_regression
from tensors.models import DenseTensor


def dense_of(layer):
    return mpo_to_matrix(layer.mpo).data


def perturbed(layer, sites_data):
    return layer.with_sites([DenseTensor(site.indices, data) for site, data in zip(layer.mpo.sites, sites_data)])


# ==================== BATCH / LAYER ====================

def test_vector_becomes_single_row_batch():
    x = Batch.from_array(np.arange(4.0))
    assert x.batch_size == 1 and x.features == 4
    assert x.data.labels == ('n', 'f')


def test_bias_length_is_checked():
    with pytest.raises(IndexMismatchError):
        MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=0), bias=np.zeros(3))


# ==================== FORWARD ====================

def test_identity_layer_passes_input_through(rng):
    mpo = MPO.from_cores([np.eye(2)[None, :, :, None]] * 3)
    x = Batch.from_array(rng.standard_normal((5, 8)))
    y, _ = mpo_forward(x, MpoLinearLayer(mpo, np.zeros(8)))
    np.testing.assert_allclose(y.array, x.array, atol=1e-14)


def test_forward_matches_dense_oracle(rng):
    layer = MpoLinearLayer(random_mpo([2, 2, 2, 2], [2, 2, 2, 2], 3, seed=1), rng.standard_normal(16))
    x = Batch.from_array(rng.standard_normal((3, 16)))
    y, flops = mpo_forward(x, layer)
    expected = x.array @ dense_of(layer) + layer.bias
    np.testing.assert_allclose(y.array, expected, atol=1e-10)
    assert flops > 0


def test_forward_matches_dense_on_random_draws(make_rng):
    for seed in range(50):
        rng = make_rng(seed)
        n_sites = int(rng.integers(1, 5))
        in_dims = [int(d) for d in rng.integers(1, 5, n_sites)]
        out_dims = [int(d) for d in rng.integers(1, 5, n_sites)]
        layer = MpoLinearLayer(random_mpo(in_dims, out_dims, int(rng.integers(1, 4)), seed=seed))
        x = Batch.from_array(rng.standard_normal((int(rng.integers(1, 5)), layer.in_size)))
        y, _ = mpo_forward(x, layer)
        expected = x.array @ dense_of(layer)
        assert np.linalg.norm(y.array - expected) <= 1e-10 * max(np.linalg.norm(expected), 1.0)


def test_forward_is_strategy_independent(rng):
    layer = MpoLinearLayer(random_mpo([2, 3, 2], [3, 2, 2], 2, seed=2))
    x = Batch.from_array(rng.standard_normal((4, layer.in_size)))
    outputs = [
        mpo_forward(x, layer, 'exhaustive')[0].array,
        mpo_forward(x, layer, 'greedy')[0].array,
        mpo_forward(x, layer, 'fixed', sequential_order(3))[0].array,
    ]
    for y in outputs[1:]:
        np.testing.assert_allclose(y, outputs[0], atol=1e-10)


def test_plans_are_cached_per_batch_size(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=3))
    mpo_forward(Batch.from_array(rng.standard_normal((4, 4))), layer)
    mpo_forward(Batch.from_array(rng.standard_normal((4, 4))), layer, 'exhaustive')
    assert set(layer.plan_cache) == {(4, 'greedy'), (4, 'exhaustive')}


def test_forward_rejects_wrong_width(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=3))
    with pytest.raises(IndexMismatchError):
        mpo_forward(Batch.from_array(rng.standard_normal((2, 5))), layer)


def test_dense_forward_applies_bias(rng):
    layer = MpoLinearLayer(random_mpo([2], [3], 1, seed=0), np.ones(3))
    x = Batch.from_array(np.zeros((2, 2)))
    np.testing.assert_array_equal(dense_forward(x, layer).array, np.ones((2, 3)))


# ==================== BACKWARD ====================

def test_zero_output_gradient_gives_zero_gradients(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=4), np.zeros(4))
    x = Batch.from_array(rng.standard_normal((3, 4)))
    d_x, d_sites, d_bias = mpo_backward(x, layer, Batch.from_array(np.zeros((3, 4))))
    assert not np.any(d_x.array)
    assert all(not np.any(g.data) for g in d_sites)
    assert not np.any(d_bias)


def test_single_site_reduces_to_dense_layer_gradients(rng):
    layer = MpoLinearLayer(random_mpo([3], [4], 1, seed=5))
    x = Batch.from_array(rng.standard_normal((5, 3)))
    d_out = rng.standard_normal((5, 4))
    d_x, d_sites, d_bias = mpo_backward(x, layer, Batch.from_array(d_out))
    np.testing.assert_allclose(d_sites[0].data.reshape(3, 4), x.array.T @ d_out, atol=1e-12)
    np.testing.assert_allclose(d_x.array, d_out @ dense_of(layer).T, atol=1e-12)
    assert d_bias is None


def test_site_gradients_match_finite_differences(make_rng):
    # each site entry enters the objective linearly
    h = 1e-4
    for seed in range(50):
        rng = make_rng(seed)
        layer = MpoLinearLayer(random_mpo([2, 2, 2], [2, 3, 2], 2, seed=seed), rng.standard_normal(12))
        x = Batch.from_array(rng.standard_normal((4, layer.in_size)))
        d_out = rng.standard_normal((4, layer.out_size))

        def objective(candidate):
            y, _ = mpo_forward(x, candidate)
            return float(np.sum(d_out * y.array))

        d_x, d_sites, d_bias = mpo_backward(x, layer, Batch.from_array(d_out))
        for k, site in enumerate(layer.mpo.sites):
            assert d_sites[k].labels == site.labels
            numeric = np.zeros(site.shape)
            for idx in np.ndindex(site.shape):
                data = [s.data.copy() for s in layer.mpo.sites]
                data[k][idx] += h
                plus = objective(perturbed(layer, data))
                data[k][idx] -= 2 * h
                minus = objective(perturbed(layer, data))
                numeric[idx] = (plus - minus) / (2 * h)
            np.testing.assert_allclose(d_sites[k].data, numeric, rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(d_x.array, d_out @ dense_of(layer).T, atol=1e-10)
        np.testing.assert_allclose(d_bias, d_out.sum(axis=0), atol=1e-12)


def test_backward_checks_shapes(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=6))
    with pytest.raises(IndexMismatchError):
        mpo_backward(Batch.from_array(np.zeros((3, 4))), layer, Batch.from_array(np.zeros((2, 4))))


# ==================== COMPRESSION ====================

def test_compression_report_counts():
    report = compression_report(random_mpo([4, 4, 4], [4, 4, 4], 2, seed=0))
    assert report.n_params_tn == 128
    assert report.per_site_counts == (32, 64, 32)
    assert report.n_params_dense == 4096
    assert report.ratio == 0.03125


def test_compression_report_unit_bonds():
    report = compression_report(random_mpo([2, 2, 2], [2, 2, 2], 1, seed=0))
    assert report.n_params_tn == 12
    assert report.n_params_dense == 64


def test_compression_report_recounts_random_configurations(make_rng):
    for seed in range(50):
        rng = make_rng(seed)
        n_sites = int(rng.integers(1, 5))
        in_dims = [int(d) for d in rng.integers(1, 5, size=n_sites)]
        out_dims = [int(d) for d in rng.integers(1, 5, size=n_sites)]
        bond = int(rng.integers(1, 5))
        report = compression_report(random_mpo(in_dims, out_dims, bond, seed=seed))
        bonds = [1] + [bond] * (n_sites - 1) + [1]
        counts = [bonds[n] * in_dims[n] * out_dims[n] * bonds[n + 1] for n in range(n_sites)]
        assert report.per_site_counts == tuple(counts)
        assert report.n_params_tn == sum(counts)
        assert report.n_params_dense == int(np.prod(in_dims)) * int(np.prod(out_dims))
        assert report.ratio == sum(counts) / report.n_params_dense


def test_full_rank_mpo_has_overhead(rng):
    mpo = matrix_to_mpo(DenseTensor.from_array(rng.standard_normal((16, 16)), ('i', 'j')), [2] * 4, [2] * 4)
    assert compression_report(mpo).ratio >= 1


def test_compression_report_to_dict():
    data = compression_report(random_mpo([2, 2], [2, 2], 1, seed=0)).to_dict()
    assert data == {'n_params_tn': 8, 'n_params_dense': 16, 'ratio': 0.5, 'per_site_counts': [4, 4]}


# ==================== SCALING ====================

def test_zero_inflation_keeps_matrix():
    mpo = random_mpo([2, 2, 2], [2, 2, 2], 2, seed=7)
    inflated = bond_inflate(mpo, 1, 4)
    assert inflated.bond_dims == (2, 4)
    np.testing.assert_allclose(mpo_to_matrix(inflated).data, mpo_to_matrix(mpo).data, atol=1e-12)


def test_inflate_then_recompress_restores_bond():
    mpo = random_mpo([2, 2, 2], [2, 2, 2], 2, seed=8)
    restored = mpo_recompress(bond_inflate(mpo, 0, 4), tol=1e-12)
    assert restored.bond_dims == (2, 2)


def test_noise_inflation_is_seeded():
    mpo = random_mpo([2, 2], [2, 2], 2, seed=9)
    a = bond_inflate(mpo, 0, 3, 'noise', 1e-3, seed=1)
    b = bond_inflate(mpo, 0, 3, 'noise', 1e-3, seed=1)
    np.testing.assert_array_equal(a.sites[0].data, b.sites[0].data)
    assert np.any(a.sites[0].data[..., 2])


def test_inflation_cannot_shrink():
    mpo = random_mpo([2, 2], [2, 2], 3, seed=9)
    with pytest.raises(DecompositionError) as exc:
        bond_inflate(mpo, 0, 2)
    assert exc.value.code == 'shrinking_bond'
    with pytest.raises(IndexMismatchError):
        bond_inflate(mpo, 1, 4)


def test_appended_identity_site_is_kronecker_with_identity():
    mpo = random_mpo([2, 3], [3, 2], 2, seed=10)
    grown = insert_site(mpo, 2, 2, 2)
    assert grown.n_sites == 3
    np.testing.assert_allclose(mpo_to_matrix(grown).data, np.kron(mpo_to_matrix(mpo).data, np.eye(2)), atol=1e-12)


def test_prepended_identity_site_is_identity_kronecker():
    mpo = random_mpo([2, 3], [3, 2], 2, seed=10)
    grown = insert_site(mpo, 0, 2, 2)
    np.testing.assert_allclose(mpo_to_matrix(grown).data, np.kron(np.eye(2), mpo_to_matrix(mpo).data), atol=1e-12)


def test_singleton_site_in_the_middle_keeps_matrix():
    mpo = random_mpo([2, 3], [3, 2], 2, seed=11)
    grown = insert_site(mpo, 1, 1, 1)
    assert grown.bond_dims == (2, 2)
    np.testing.assert_allclose(mpo_to_matrix(grown).data, mpo_to_matrix(mpo).data, atol=1e-12)


def test_non_square_identity_site_is_rejected():
    mpo = random_mpo([2, 2], [2, 2], 2, seed=12)
    with pytest.raises(DecompositionError) as exc:
        insert_site(mpo, 1, 2, 3)
    assert exc.value.code == 'not_square'
    assert insert_site(mpo, 1, 2, 3, init='random', seed=0).shape == (8, 12)
    with pytest.raises(IndexMismatchError):
        insert_site(mpo, 3, 2, 2)


# ==================== TRAINING ====================

def test_mse_loss_and_gradient():
    loss, grad = mse_loss(np.array([[1.0, 3.0]]), np.array([[0.0, 1.0]]))
    assert loss == 2.5
    np.testing.assert_array_equal(grad, [[1.0, 2.0]])


def test_zero_learning_rate_keeps_loss_constant(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=13))
    x = Batch.from_array(rng.standard_normal((8, 4)))
    y = Batch.from_array(rng.standard_normal((8, 4)))
    trained, losses = train_mpo_regression(x, y, layer, 0.0, 5, seed=0)
    assert len(losses) == 5
    assert max(losses) - min(losses) == 0.0
    np.testing.assert_array_equal(trained.mpo.sites[0].data, layer.mpo.sites[0].data)


def test_one_full_batch_epoch_is_one_gradient_step(rng):
    w = rng.standard_normal((2, 2))
    layer = MpoLinearLayer(MPO.from_cores([w[None, :, :, None]]), np.array([0.5, -0.5]))
    x = rng.standard_normal((3, 2))
    y = rng.standard_normal((3, 2))
    lr = 0.1

    trained, losses = train_mpo_regression(Batch.from_array(x), Batch.from_array(y), layer, lr, 1)
    residual = x @ w + layer.bias - y
    d_out = 2.0 * residual / residual.size
    assert abs(losses[0] - np.mean(residual ** 2)) <= 1e-14
    np.testing.assert_allclose(trained.mpo.sites[0].data.reshape(2, 2), w - lr * x.T @ d_out, atol=1e-14)
    np.testing.assert_allclose(trained.bias, layer.bias - lr * d_out.sum(axis=0), atol=1e-14)


def test_training_decreases_loss_on_realizable_target(rng):
    target = MpoLinearLayer(random_mpo([2, 2, 2, 2], [2, 2, 2, 2], 2, seed=14))
    start = perturbed(target, [s.data + 0.05 * rng.standard_normal(s.shape) for s in target.mpo.sites])
    x = Batch.from_array(rng.standard_normal((64, 16)))
    y = dense_forward(x, target)
    _, losses = train_mpo_regression(x, y, start, 0.05, 300, seed=0)
    assert losses[-1] < 0.1 * losses[0]


def test_random_student_fits_random_bond_two_target(make_rng):
    for seed in range(3):
        rng = make_rng(seed)
        target = MpoLinearLayer(random_mpo([2] * 4, [2] * 4, 2, rng.integers(2 ** 31)))
        student = MpoLinearLayer(random_mpo([2] * 4, [2] * 4, 2, rng.integers(2 ** 31)))
        x = Batch.from_array(rng.standard_normal((64, 16)))
        y = dense_forward(x, target)
        _, losses = train_mpo_regression(x, y, student, 0.2, 2000, seed=seed)
        assert losses[-1] / np.mean(y.array ** 2) <= 1e-3


def test_training_is_deterministic_with_minibatches(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=15))
    x = Batch.from_array(rng.standard_normal((10, 4)))
    y = Batch.from_array(rng.standard_normal((10, 4)))
    _, a = train_mpo_regression(x, y, layer, 0.05, 4, seed=3, batch_size=3)
    _, b = train_mpo_regression(x, y, layer, 0.05, 4, seed=3, batch_size=3)
    assert a == b


def test_frozen_sites_keep_their_values(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=16))
    x = Batch.from_array(rng.standard_normal((6, 4)))
    y = Batch.from_array(rng.standard_normal((6, 4)))
    trained, _ = train_mpo_regression(x, y, layer, 0.05, 3, freeze=[True, False])
    np.testing.assert_array_equal(trained.mpo.sites[0].data, layer.mpo.sites[0].data)
    assert not np.array_equal(trained.mpo.sites[1].data, layer.mpo.sites[1].data)


def test_plateau_grows_bonds(rng):
    layer = MpoLinearLayer(random_mpo([2, 2, 2, 2], [2, 2, 2, 2], 2, seed=17))
    x = Batch.from_array(rng.standard_normal((4, 16)))
    y = Batch.from_array(rng.standard_normal((4, 16)))
    policy = BondGrowthPolicy(patience=1, max_bond=3)
    trained, _ = train_mpo_regression(x, y, layer, 0.0, 3, seed=0, growth=policy)
    assert trained.mpo.bond_dims == (3, 3, 3)


def test_divergence_is_reported(rng):
    layer = MpoLinearLayer(random_mpo([2, 2, 2], [2, 2, 2], 2, seed=18))
    x = Batch.from_array(rng.standard_normal((4, 8)))
    y = Batch.from_array(rng.standard_normal((4, 8)))
    with pytest.raises(TrainingDivergedError):
        with np.errstate(all='ignore'):
            train_mpo_regression(x, y, layer, 1e12, 50)


def test_training_validates_arguments(rng):
    layer = MpoLinearLayer(random_mpo([2, 2], [2, 2], 2, seed=19))
    x = Batch.from_array(np.zeros((2, 4)))
    with pytest.raises(TensorNetworkError):
        train_mpo_regression(x, x, layer, -1.0, 1)
    with pytest.raises(TensorNetworkError):
        train_mpo_regression(x, Batch.from_array(np.zeros((3, 4))), layer, 0.1, 1)
    with pytest.raises(TensorNetworkError):
        train_mpo_regression(x, x, layer, 0.1, 1, freeze=[True])
