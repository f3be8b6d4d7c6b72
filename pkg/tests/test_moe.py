import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bp6.errors import ShapeError
from bp6.moe import MoeHead, fuse
from bp6.nn import functional as F
from bp6.nn.gradcheck import grad_check
from bp6.nn.tensor import Tensor


def _embeddings(rng, batch=3, dim=128):
    return [Tensor(rng.normal(size=(batch, dim))) for _ in range(6)]


class TestFuse:
    def test_first_block(self):
        embs = [Tensor(np.ones((1, 128)))] + [Tensor(np.zeros((1, 128))) for _ in range(5)]
        f = fuse(embs).data[0]
        assert f.shape == (768,)
        assert np.all(f[:128] == 1) and np.all(f[128:] == 0)

    def test_order_sensitive(self, rng):
        embs = _embeddings(rng)
        assert not np.array_equal(fuse(embs).data, fuse(embs[::-1]).data)

    def test_block_energy(self, rng):
        embs = _embeddings(rng)
        np.testing.assert_allclose(np.sum(fuse(embs).data ** 2, axis=1), sum(np.sum(e.data ** 2, axis=1) for e in embs))

    def test_wrong_dim(self, rng):
        embs = _embeddings(rng)
        embs[3] = Tensor(np.zeros((3, 127)))
        with pytest.raises(ShapeError, match="embedding t"):
            fuse(embs)


class TestGate:
    def test_zero_weights_uniform(self, rng):
        head = MoeHead(768, (8,), 4, rng)
        head.gate.linear.weight.data[:] = 0
        head.gate.linear.bias.data[:] = 0
        np.testing.assert_allclose(head.gate(Tensor(rng.normal(size=(2, 768)))).data, 0.25)

    def test_saturation(self, rng):
        head = MoeHead(768, (8,), 4, rng)
        head.gate.linear.bias.data[:] = [0.0, 0.0, 80.0, 0.0]
        g = head.gate(Tensor(rng.normal(size=(2, 768)) * 0.01)).data
        np.testing.assert_allclose(g[:, 2], 1.0, atol=1e-12)

    @given(st.integers(0, 2**31 - 1), st.integers(1, 6))
    def test_simplex(self, seed, experts):
        rng = np.random.default_rng(seed)
        head = MoeHead(12, (4,), experts, rng)
        g = head.gate(Tensor(rng.normal(scale=5, size=(5, 12)))).data
        assert np.all(g > 0)
        np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-9)


class TestMoeForward:
    def _eval_head(self, experts, seed=0, hidden=(16, 16, 8)):
        rng = np.random.default_rng(seed)
        head = MoeHead(768, hidden, experts, rng)
        for e in head.experts:
            for bn in e.norms:
                bn.running_mean[:] = rng.normal(size=bn.running_mean.shape)
                bn.running_var[:] = rng.uniform(0.5, 2.0, size=bn.running_var.shape)
        return head.eval()

    def test_single_expert_exact(self, rng):
        head = self._eval_head(1)
        f = Tensor(rng.normal(size=(3, 768)))
        np.testing.assert_array_equal(head(f).data, head.experts[0](f).data)

    def test_identical_experts(self, rng):
        head = self._eval_head(4)
        state = head.experts[0].state_dict()
        for e in head.experts[1:]:
            e.load_state_dict(state)
        f = Tensor(rng.normal(size=(3, 768)))
        np.testing.assert_allclose(head(f).data, head.experts[0](f).data, rtol=1e-12)

    def test_term_by_term_oracle(self, rng):
        head = self._eval_head(4)
        f = rng.normal(size=(3, 768))

        def expert_np(e, x):
            for lin, bn in zip(e.linears, e.norms):
                h = np.maximum(x @ lin.weight.data.T + lin.bias.data, 0.0)
                x = (h - bn.running_mean) / np.sqrt(bn.running_var + 1e-5) * bn.weight.data + bn.bias.data
            return x @ e.out.weight.data.T + e.out.bias.data

        logits = f @ head.gate.linear.weight.data.T + head.gate.linear.bias.data
        g = np.exp(logits - logits.max(1, keepdims=True))
        g /= g.sum(1, keepdims=True)
        expected = sum(g[:, [i]] * expert_np(e, f) for i, e in enumerate(head.experts))
        np.testing.assert_allclose(head(Tensor(f)).data, expected, rtol=1e-10, atol=1e-10)

    def test_convexity(self, rng):
        head = self._eval_head(4)
        y, g, outs = head(Tensor(rng.normal(size=(5, 768))), return_parts=True)
        stack = np.stack([o.data for o in outs])
        assert np.all(y.data >= stack.min(0) - 1e-12) and np.all(y.data <= stack.max(0) + 1e-12)

    def test_checkpoint_names(self, rng):
        names = {n.split(".")[0] for n, _ in MoeHead(10, (4,), 3, rng).named_parameters()}
        assert names == {"gate", "expert_0", "expert_1", "expert_2"}

    def test_gradient(self, rng):
        # eval-mode BN: train-mode BN makes the bias gradient of an always-active unit exactly zero,
        # which only measures finite-difference rounding
        head = MoeHead(24, (10, 8), 3, rng)
        for e in head.experts:
            for bn in e.norms:
                bn.running_mean[:] = rng.normal(size=bn.running_mean.shape)
                bn.running_var[:] = rng.uniform(0.5, 2.0, size=bn.running_var.shape)
        head.eval()
        f = Tensor(rng.normal(size=(6, 24)))
        w = Tensor(rng.normal(size=(6, 2)))
        assert grad_check(lambda: F.sum(F.mul(head(f), w)), head.parameters()) < 1e-4
