import pytest
import torch

from artinet.config import ArtinetConfig
from artinet.model import ArtiNet, ColumnFusionHead
from artinet.train import row_loss


def finite_difference_grads(head, feats, labels, eps=1e-6):
    """Central differences over every head parameter, double precision."""
    grads = []
    for param in head.parameters():
        flat = param.data.reshape(-1)
        grad = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            up = row_loss(head(feats), labels).item()
            flat[i] = orig - eps
            down = row_loss(head(feats), labels).item()
            flat[i] = orig
            grad[i] = (up - down) / (2 * eps)
        grads.append(grad.reshape(param.shape))
    return grads


class TestColumnFusionHead:
    def test_backprop_matches_finite_differences(self):
        torch.manual_seed(0)
        head = ColumnFusionHead(6).double()
        feats = torch.randn(3, 6, 17, 17, dtype=torch.float64)
        labels = torch.randint(0, 2, (3, 17))
        loss = row_loss(head(feats), labels)
        loss.backward()
        numeric = finite_difference_grads(head, feats, labels)
        for param, expected in zip(head.parameters(), numeric):
            rel = (param.grad - expected).abs() / expected.abs().clamp_min(1e-8)
            assert float(rel.max()) < 1e-4

    def test_column_permutation_invariance_exact(self):
        torch.manual_seed(1)
        head = ColumnFusionHead(8).double()
        feats = torch.randn(4, 8, 17, 17, dtype=torch.float64)
        for _ in range(5):
            perm = torch.randperm(17)
            assert torch.equal(head(feats), head(feats[:, :, :, perm]))

    def test_row_probabilities_sum_to_one(self):
        torch.manual_seed(2)
        head = ColumnFusionHead(5)
        feats = torch.randn(2, 5, 17, 17)
        probs = head.row_probabilities(feats)
        assert probs.shape == (2, 17, 2)
        assert torch.allclose(probs.sum(dim=2), torch.ones(2, 17), atol=1e-6)

    def test_zero_features_give_bias_softmax(self):
        head = ColumnFusionHead(4)
        with torch.no_grad():
            head.project.weight.zero_()
            head.project.bias.copy_(torch.tensor([0.3, -0.2]))
        probs = head.row_probabilities(torch.zeros(1, 4, 17, 17))
        expected = torch.softmax(torch.tensor([0.3, -0.2]), dim=0)
        assert torch.allclose(probs[0], expected.expand(17, 2))

    def test_identity_conv_reduces_to_column_max(self):
        # with 2 channels and an identity 1x1 conv, each row logit is the
        # plain maximum of that feature channel over the width
        head = ColumnFusionHead(2)
        with torch.no_grad():
            head.project.weight.copy_(torch.eye(2).reshape(2, 2, 1, 1))
            head.project.bias.zero_()
        feats = torch.randn(3, 2, 17, 17)
        out = head(feats)
        direct = feats.max(dim=3).values.transpose(1, 2)
        assert torch.equal(out, direct)

    def test_shape_mismatch_rejected(self):
        head = ColumnFusionHead(4)
        with pytest.raises((ValueError, RuntimeError)):
            head(torch.zeros(4, 17, 17))


class TestArtiNet:
    def test_backbone_yields_expected_grid(self):
        model = ArtiNet(ArtinetConfig(channels=8))
        out = model(torch.zeros(1, 3, 299, 299))
        assert out.shape == (1, 17, 2)

    def test_parameter_groups_carry_two_rates(self):
        cfg = ArtinetConfig(channels=8, lr_head=1e-3, lr_backbone=1e-4)
        groups = ArtiNet(cfg).parameter_groups()
        assert [g["lr"] for g in groups] == [1e-4, 1e-3]
