import numpy as np

from bp6.optim import Adam, AdamConfig
from bp6.nn.tensor import Parameter


def _reference_adam(theta, grad_fn, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return theta


class TestAdam:
    def test_zero_gradient_is_identity(self, rng):
        p = Parameter(rng.normal(size=5))
        before = p.data.copy()
        opt = Adam([p])
        for _ in range(3):
            p.grad = np.zeros(5)
            opt.step()
        np.testing.assert_array_equal(p.data, before)
        assert opt.step_count == 3

    def test_missing_gradient_counts_as_zero(self):
        p = Parameter(np.ones(2))
        opt = Adam([p])
        opt.step()
        np.testing.assert_array_equal(p.data, 1.0)

    def test_first_step_is_lr_times_sign(self):
        p = Parameter(np.array([0.0, 0.0, 0.0]))
        p.grad = np.array([3.0, -0.2, 1e3])
        Adam([p], AdamConfig(lr=1e-3)).step()
        np.testing.assert_allclose(p.data, [-1e-3, 1e-3, -1e-3], rtol=1e-6)

    def test_quadratic(self):
        # lr 1e-2: at the default 3e-4 Adam moves at most ~0.03 in 100 steps
        p = Parameter(np.array([1.0]))
        opt = Adam([p], AdamConfig(lr=1e-2))
        for _ in range(100):
            p.grad = 2 * p.data
            opt.step()
        assert abs(p.data[0]) < 0.5
        assert abs(p.data[0] - _reference_adam(1.0, lambda th: 2 * th, 100, 1e-2)) < 1e-12

    def test_zero_grad(self):
        p = Parameter(np.ones(2))
        p.grad = np.ones(2)
        Adam([p]).zero_grad()
        assert p.grad is None
