"""Spectral normalization, the residual embedding network and AMM training."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from torch.func import functional_call

from flakesynth.core.config import AMMSettings, TrainSettings
from flakesynth.core.errors import PreprocessError
from flakesynth.mixture import (
    AMMNetwork,
    Classifier,
    LabeledContrastSet,
    SpectralLinear,
    amm_forward,
    classify_amm,
    load_model,
    save_model,
    spectral_normalize,
    train_amm,
)

DTYPE = torch.float64
CENTERS = np.array([[-2.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.5, 0.0]])


def three_gaussians(seed=0, n=500, sigma=0.2):
    rng = np.random.default_rng(seed)
    points = np.vstack([rng.normal(center, sigma, (n, 3)) for center in CENTERS])
    labels = np.repeat(np.arange(3), n)
    return LabeledContrastSet(points, labels, [0, 1, 2], ["background", "one", "two"])


def fresh_network(seed=0, **overrides):
    settings = AMMSettings(**overrides)
    network = AMMNetwork(settings, 3, torch.Generator().manual_seed(seed))
    for block in network.blocks:
        block.refresh(50)
    return network.eval()


def known_spectrum(singular_values, seed=0):
    generator = torch.Generator().manual_seed(seed)
    size = len(singular_values)
    left, _ = torch.linalg.qr(torch.randn(size, size, generator=generator, dtype=DTYPE))
    right, _ = torch.linalg.qr(torch.randn(size, size, generator=generator, dtype=DTYPE))
    return left @ torch.diag(torch.tensor(singular_values, dtype=DTYPE)) @ right.t()


class TestSpectralNormalize:
    def test_identity_scaled_to_coefficient(self):
        u = torch.tensor([1.0, 0.0, 0.0], dtype=DTYPE)
        weight, scale = spectral_normalize(torch.eye(3, dtype=DTYPE), 0.5, u)
        assert torch.allclose(weight, 0.5 * torch.eye(3, dtype=DTYPE))
        assert float(scale) == pytest.approx(0.5)

    def test_small_norm_untouched(self):
        u = torch.tensor([0.0, 1.0, 0.0], dtype=DTYPE)
        weight = 0.3 * torch.eye(3, dtype=DTYPE)
        normalized, scale = spectral_normalize(weight, 0.5, u)
        assert torch.equal(normalized, weight)
        assert float(scale) == 1.0

    def test_zero_matrix_untouched(self):
        u = torch.tensor([0.6, 0.8, 0.0], dtype=DTYPE)
        weight = torch.zeros(3, 3, dtype=DTYPE)
        normalized, _ = spectral_normalize(weight, 0.5, u)
        assert torch.equal(normalized, weight)
        assert torch.equal(u, torch.tensor([0.6, 0.8, 0.0], dtype=DTYPE))

    def test_power_iteration_matches_svd(self):
        layer = SpectralLinear(8, 0.5, torch.Generator().manual_seed(1))
        with torch.no_grad():
            layer.weight.copy_(known_spectrum([3.0, 1.0, 0.9, 0.5, 0.4, 0.3, 0.2, 0.1]))
        layer.refresh(50)
        assert float(layer.scale) == pytest.approx(0.5 / 3.0, rel=1e-9)
        assert float(torch.linalg.matrix_norm(layer.normalized_weight(), ord=2)) == pytest.approx(0.5, rel=1e-9)

    def test_no_update_keeps_vector(self):
        u = torch.tensor([1.0, 0.0], dtype=DTYPE)
        spectral_normalize(torch.tensor([[1.0, 2.0], [3.0, 4.0]], dtype=DTYPE), 0.5, u, update=False)
        assert torch.equal(u, torch.tensor([1.0, 0.0], dtype=DTYPE))


class TestNetwork:
    def test_zero_blocks_are_identity_residuals(self):
        network = fresh_network()
        with torch.no_grad():
            for block in network.blocks:
                block.weight.zero_()
                block.bias.zero_()
        x = torch.randn(20, 3, generator=torch.Generator().manual_seed(2), dtype=DTYPE)
        with torch.no_grad():
            embedding, _ = network(x)
            assert torch.allclose(embedding, network.input_proj(x))

    def test_eval_is_deterministic(self):
        network = fresh_network()
        points = np.random.default_rng(3).normal(size=(50, 3))
        first, _ = amm_forward(network, points)
        second, _ = amm_forward(network, points)
        assert np.array_equal(first, second)

    def test_training_forward_restores_buffers(self):
        network = fresh_network()
        before = {name: buffer.clone() for name, buffer in network.named_buffers()}
        amm_forward(network, np.zeros((4, 3)), training=True, generator=torch.Generator().manual_seed(0))
        for name, buffer in network.named_buffers():
            assert torch.equal(buffer, before[name])
        assert not network.training

    def test_lipschitz_bound_holds(self):
        network = fresh_network(seed=5)
        bound = network.lipschitz_bound()
        rng = np.random.default_rng(4)
        x = rng.normal(size=(10_000, 3))
        y = x + rng.normal(scale=rng.uniform(1e-3, 2.0, (10_000, 1)), size=(10_000, 3))
        fx, _ = amm_forward(network, x)
        fy, _ = amm_forward(network, y)
        ratio = np.linalg.norm(fx - fy, axis=1) / np.linalg.norm(x - y, axis=1)
        assert ratio.max() <= bound * (1 + 1e-9)

    def test_gradient_matches_finite_differences(self):
        network = fresh_network(seed=6)
        x = torch.randn(50, 3, generator=torch.Generator().manual_seed(7), dtype=DTYPE, requires_grad=True)
        assert torch.autograd.gradcheck(lambda inputs: network(inputs)[1], (x,), eps=1e-6, atol=1e-7, rtol=1e-4)

    def test_loss_gradient_matches_finite_differences_for_every_parameter(self):
        network = fresh_network(seed=6, embedding_dim=4, depth=2)
        generator = torch.Generator().manual_seed(8)
        x = torch.randn(10, 3, generator=generator, dtype=DTYPE)
        y = torch.randint(3, (10,), generator=generator)
        names = [name for name, _ in network.named_parameters()]
        values = tuple(parameter.detach().clone().requires_grad_(True) for parameter in network.parameters())

        def loss(*parameters):
            _, logits = functional_call(network, dict(zip(names, parameters)), (x,))
            return F.cross_entropy(logits, y)

        assert torch.autograd.gradcheck(loss, values, eps=1e-6, atol=1e-8, rtol=1e-4)

    def test_dropout_only_in_training(self):
        network = fresh_network(dropout=0.5)
        points = np.random.default_rng(8).normal(size=(30, 3))
        train_a, _ = amm_forward(network, points, training=True, generator=torch.Generator().manual_seed(1))
        train_b, _ = amm_forward(network, points, training=True, generator=torch.Generator().manual_seed(2))
        assert not np.array_equal(train_a, train_b)


class TestTraining:
    settings = AMMSettings()
    train = TrainSettings(iterations=300, batch_size=256, seed=3, log_every=100)

    @pytest.fixture(scope="class")
    def model(self):
        return train_amm(three_gaussians(), self.settings, self.train)

    def test_accuracy(self, model):
        test = three_gaussians(seed=1)
        posteriors, _ = model.classify(test.points)
        assert np.mean(posteriors.argmax(axis=1) == test.labels) >= 0.99

    def test_confident_at_centers(self, model):
        posteriors, rejected = model.classify(CENTERS)
        assert np.all(posteriors[np.arange(3), np.arange(3)] > 0.9)
        assert not rejected.any()

    def test_outlier_rejected(self, model):
        _, rejected = classify_amm(model, np.array([20.0, -20.0, 20.0]))
        assert rejected

    def test_loss_decreases(self, model):
        assert model.metrics["final_loss"] < model.metrics["initial_loss"]

    def test_uniform_priors(self, model):
        assert np.allclose(model.densities.priors, 1.0 / 3.0)

    def test_satisfies_protocol(self, model):
        assert isinstance(model, Classifier)
        assert model.kind == "amm"

    def test_every_step_respects_spectral_bound(self):
        norms = []

        def check(iteration, network):
            for block in network.blocks:
                norms.append(float(torch.linalg.matrix_norm(block.pending_weight(), ord=2)) / block.coefficient)

        train_amm(three_gaussians(), self.settings, self.train, on_step=check)
        assert len(norms) == self.train.iterations * self.settings.depth
        assert max(norms) <= 1.05

    def test_seed_reproduces_weights(self):
        short = self.train.model_copy(update={"iterations": 30})
        first = train_amm(three_gaussians(), self.settings, short)
        second = train_amm(three_gaussians(), self.settings, short)
        for (name, left), (_, right) in zip(first.network.state_dict().items(), second.network.state_dict().items()):
            assert torch.equal(left, right), name
        assert first.threshold == second.threshold

    def test_save_load_is_exact(self, model, tmp_path):
        save_model(model, tmp_path / "amm.json")
        loaded = load_model(tmp_path / "amm.json")
        points = np.random.default_rng(9).normal(0, 2, (200, 3))
        left, left_rejected = model.classify(points)
        right, right_rejected = loaded.classify(points)
        assert np.array_equal(left, right)
        assert np.array_equal(left_rejected, right_rejected)
        assert loaded.threshold == model.threshold

    def test_input_dim_mismatch(self):
        with pytest.raises(PreprocessError, match="input_dim"):
            train_amm(three_gaussians(), AMMSettings(input_dim=4), self.train)


@pytest.mark.slow
def test_long_training_keeps_spectral_bound():
    worst = []

    def check(iteration, network):
        worst.append(max(float(torch.linalg.matrix_norm(block.pending_weight(), ord=2)) / block.coefficient
                         for block in network.blocks))

    model = train_amm(three_gaussians(n=2000), AMMSettings(), TrainSettings(iterations=5000, batch_size=1024),
                      on_step=check)
    assert len(worst) == 5000
    assert max(worst) <= 1.05
    for block in model.network.blocks:
        block.refresh(50)
        norm = float(torch.linalg.matrix_norm(block.normalized_weight(), ord=2))
        assert norm <= block.coefficient * 1.01
