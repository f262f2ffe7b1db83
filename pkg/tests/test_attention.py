import numpy as np
import pytest
import torch

from bisp.attention import (
    CONTEXT_BRANCHES,
    ContextSpatialAttention,
    VarianceChannelAttention,
    zero_conv_biases,
)
from bisp.errors import ConfigurationError
from oracles import central_difference_gradient, relative_gradient_error
from properties import (
    check_attention_shapes,
    check_sigmoid_ranges,
    check_variance_map_distribution,
)


def _gradcheck(module: torch.nn.Module, shape, tol=1e-3, step=1e-5):
    """Analytic gradient of sum(module(x)) vs central differences, float64."""
    torch.manual_seed(0)
    module = module.double()
    x0 = torch.randn(*shape, dtype=torch.float64)

    x = x0.clone().requires_grad_(True)
    module(x).sum().backward()
    analytic = x.grad.numpy()

    def scalar_loss(arr: np.ndarray) -> float:
        with torch.no_grad():
            return float(module(torch.from_numpy(arr)).sum())

    numeric = central_difference_gradient(scalar_loss, x0.numpy(), step=step)
    assert relative_gradient_error(analytic, numeric) < tol


@pytest.mark.equations
class TestVarianceChannelAttention:
    def test_zero_input_gives_uniform_variance_map(self):
        module = VarianceChannelAttention(8)
        with torch.no_grad():
            vmap = module.variance_map(torch.zeros(2, 8, 4, 5))
        np.testing.assert_allclose(vmap.numpy(), 1.0 / 20.0, atol=1e-7)

    def test_single_position_map_is_one(self):
        module = VarianceChannelAttention(4)
        with torch.no_grad():
            vmap = module.variance_map(torch.randn(3, 4, 1, 1))
        np.testing.assert_allclose(vmap.numpy(), 1.0, atol=1e-7)

    def test_zero_input_zero_biases_gives_half_channel_weights(self):
        module = VarianceChannelAttention(8)
        zero_conv_biases(module)
        with torch.no_grad():
            cmap = module.channel_map(torch.zeros(2, 8, 4, 4))
        assert cmap.shape == (2, 8, 1, 1)
        np.testing.assert_allclose(cmap.numpy(), 0.5, atol=1e-7)

    def test_identical_batch_items_get_identical_weights(self):
        module = VarianceChannelAttention(6)
        one = torch.randn(1, 6, 5, 5)
        batch = torch.cat([one, one.clone()])
        with torch.no_grad():
            cmap = module.channel_map(batch)
            vmap = module.variance_map(batch)
        np.testing.assert_array_equal(cmap[0].numpy(), cmap[1].numpy())
        np.testing.assert_array_equal(vmap[0].numpy(), vmap[1].numpy())

    def test_zero_input_passes_through_as_zero(self):
        module = VarianceChannelAttention(8)
        with torch.no_grad():
            out = module(torch.zeros(1, 8, 6, 6))
        np.testing.assert_allclose(out.numpy(), 0.0, atol=1e-7)

    def test_shape_contract(self):
        module = VarianceChannelAttention(64)
        with torch.no_grad():
            out = module(torch.randn(2, 64, 16, 16))
        assert out.shape == (2, 64, 16, 16)

    def test_odd_channel_count_rejected(self):
        with pytest.raises(ConfigurationError):
            VarianceChannelAttention(7)

    def test_non_finite_input_rejected(self):
        module = VarianceChannelAttention(4)
        bad = torch.full((1, 4, 2, 2), float("nan"))
        with pytest.raises(ValueError):
            module(bad)

    def test_gradient_matches_central_differences(self):
        _gradcheck(VarianceChannelAttention(4), (1, 4, 4, 4))


@pytest.mark.equations
class TestContextSpatialAttention:
    def test_context_extract_concatenates_to_128_channels(self):
        module = ContextSpatialAttention(64)
        with torch.no_grad():
            ctx = module.context_extract(torch.randn(1, 64, 32, 32))
        assert ctx.shape == (1, 128, 32, 32)

    def test_zero_input_zero_biases_gives_zero_context(self):
        module = ContextSpatialAttention(16)
        zero_conv_biases(module)
        with torch.no_grad():
            ctx = module.context_extract(torch.zeros(2, 16, 8, 8))
        np.testing.assert_allclose(ctx.numpy(), 0.0, atol=0.0)

    def test_branch_ladder_and_padding(self):
        assert CONTEXT_BRANCHES == ((1, 1), (3, 1), (3, 2), (3, 4))
        module = ContextSpatialAttention(8)
        convs = list(module.branches)
        assert [c.dilation[0] for c in convs] == [1, 1, 2, 4]
        assert [c.padding[0] for c in convs] == [0, 1, 2, 4]
        # every branch preserves odd spatial sizes too
        with torch.no_grad():
            ctx = module.context_extract(torch.randn(1, 8, 9, 9))
        assert ctx.shape[-2:] == (9, 9)

    def test_spatial_gate_in_unit_interval(self):
        module = ContextSpatialAttention(8)
        with torch.no_grad():
            gate = module.spatial_map(module.context_extract(torch.randn(2, 8, 6, 6)))
        assert gate.shape == (2, 1, 6, 6)
        assert float(gate.min()) > 0.0
        assert float(gate.max()) < 1.0

    def test_shape_contract(self):
        module = ContextSpatialAttention(128)
        with torch.no_grad():
            out = module(torch.randn(2, 128, 8, 8))
        assert out.shape == (2, 128, 8, 8)

    def test_non_finite_input_rejected(self):
        module = ContextSpatialAttention(4)
        bad = torch.full((1, 4, 2, 2), float("inf"))
        with pytest.raises(ValueError):
            module(bad)

    def test_gradient_matches_central_differences(self):
        _gradcheck(ContextSpatialAttention(4), (1, 4, 4, 4))


@pytest.mark.properties
class TestAttentionProperties:
    def test_shape_preservation_randomized(self):
        check_attention_shapes(cases=100)

    def test_variance_map_is_a_distribution(self):
        check_variance_map_distribution(cases=100)

    def test_gate_ranges(self):
        check_sigmoid_ranges(cases=100)

    def test_batch_independence(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            c = int(rng.integers(1, 7)) * 2
            h = int(rng.integers(2, 9))
            torch.manual_seed(int(rng.integers(0, 10_000)))
            x = torch.randn(3, c, h, h)
            for module in (VarianceChannelAttention(c), ContextSpatialAttention(c)):
                with torch.no_grad():
                    joint = module(x)
                    single = torch.cat([module(x[i:i + 1]) for i in range(3)])
                assert float((joint - single).abs().max()) <= 1e-6
