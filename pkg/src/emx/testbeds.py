"""Differentiable test objectives with analytic gradients.

Two 2-D landscapes (a banana valley and a sharp asymmetric valley), a tiny
tanh MLP with hand-written backprop for regression on synthetic data, and a
finite-difference gradient checker. Everything is deterministic given
(theta, batch), and every analytic gradient is validated against central
differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .numerics import spawn_rng

# spawn-key namespaces for dataset streams (first key component)
_KEY_TRAIN = 0
_KEY_HELDOUT = 1
_KEY_TEACHER = 2
_KEY_INIT = 3
_KEY_EVAL = 4


@np.errstate(over="ignore", invalid="ignore")
def rosenbrock(theta) -> tuple[float, np.ndarray]:
    """Banana-valley function f(x1, x2) = (1-x1)^2 + 100*(x2-x1^2)^2.

    Global minimum at (1, 1). Returns (value, analytic gradient). Overflow on
    absurd iterates propagates as inf (divergence detection reads this)
    instead of raising.
    """
    x1, x2 = np.float64(theta[0]), np.float64(theta[1])
    gap = x2 - x1 * x1
    loss = (1.0 - x1) ** 2 + 100.0 * gap * gap
    grad = np.array([-2.0 * (1.0 - x1) - 400.0 * x1 * gap, 200.0 * gap])
    return float(loss), grad


@np.errstate(over="ignore", invalid="ignore")
def sharp_valley(theta) -> tuple[float, np.ndarray]:
    """f(x, y) = 8*(x-1)^2*(1.3x^2+2x+1) + 0.5*(y-4)^2.

    Sharp curvature along x, flat along y; minimum at (1, 4).
    """
    x, y = np.float64(theta[0]), np.float64(theta[1])
    poly = 1.3 * x * x + 2.0 * x + 1.0
    loss = 8.0 * (x - 1.0) ** 2 * poly + 0.5 * (y - 4.0) ** 2
    dx = 8.0 * (2.0 * (x - 1.0) * poly + (x - 1.0) ** 2 * (2.6 * x + 2.0))
    dy = y - 4.0
    return float(loss), np.array([dx, dy])


class AnalyticTestbed:
    """2-D objective wrapping a (value, gradient) function."""

    def __init__(self, fn, optimum):
        self._fn = fn
        self.dim = 2
        self.optimum = np.asarray(optimum, dtype=np.float64)

    def loss(self, theta, batch=None) -> float:
        return self._fn(theta)[0]

    def grad(self, theta, batch=None) -> np.ndarray:
        return self._fn(theta)[1]

    def loss_and_grad(self, theta, batch=None):
        return self._fn(theta)


def rosenbrock_testbed() -> AnalyticTestbed:
    return AnalyticTestbed(rosenbrock, (1.0, 1.0))


def sharp_valley_testbed() -> AnalyticTestbed:
    return AnalyticTestbed(sharp_valley, (1.0, 4.0))


class TinyMlp:
    """Fully-connected tanh network with parameters in one flat vector.

    ``layer_dims`` gives (input, hidden..., output) widths. Hidden layers use
    tanh (smooth, so finite-difference checks hold at tight tolerance); the
    output layer is linear. Loss is the mean squared error over all batch
    elements and output coordinates.
    """

    optimum = None  # no known minimizer

    def __init__(self, layer_dims=(16, 64, 64, 1)):
        if len(layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self._shapes = []
        offset = 0
        for d_in, d_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            w_slice = slice(offset, offset + d_in * d_out)
            offset += d_in * d_out
            b_slice = slice(offset, offset + d_out)
            offset += d_out
            self._shapes.append((d_in, d_out, w_slice, b_slice))
        self.n_params = offset
        self.dim = offset

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Gaussian weights scaled by 1/sqrt(fan_in), zero biases."""
        theta = np.zeros(self.n_params)
        for d_in, d_out, w_slice, b_slice in self._shapes:
            theta[w_slice] = rng.standard_normal(d_in * d_out) / np.sqrt(d_in)
        return theta

    def _unpack(self, theta):
        for d_in, d_out, w_slice, b_slice in self._shapes:
            yield theta[w_slice].reshape(d_in, d_out), theta[b_slice]

    @np.errstate(over="ignore", invalid="ignore")
    def forward(self, theta: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        a = inputs
        layers = list(self._unpack(theta))
        for i, (w, b) in enumerate(layers):
            z = a @ w + b
            a = z if i == len(layers) - 1 else np.tanh(z)
        return a

    def loss(self, theta, batch) -> float:
        inputs, targets = batch
        pred = self.forward(theta, inputs)
        return float(np.mean((pred - targets) ** 2))

    def grad(self, theta, batch) -> np.ndarray:
        return self.loss_and_grad(theta, batch)[1]

    @np.errstate(over="ignore", invalid="ignore")
    def loss_and_grad(self, theta, batch):
        inputs, targets = batch
        if inputs.shape[1] != self.layer_dims[0]:
            raise ValueError(
                f"input width {inputs.shape[1]} does not match first layer "
                f"{self.layer_dims[0]}"
            )
        layers = list(self._unpack(theta))
        activations = [inputs]
        a = inputs
        for i, (w, b) in enumerate(layers):
            z = a @ w + b
            a = z if i == len(layers) - 1 else np.tanh(z)
            activations.append(a)
        pred = activations[-1]
        diff = pred - targets
        loss = float(np.mean(diff**2))

        grad = np.zeros_like(theta)
        d_a = 2.0 * diff / diff.size
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            a_out = activations[i + 1]
            d_z = d_a if i == len(layers) - 1 else d_a * (1.0 - a_out * a_out)
            _, _, w_slice, b_slice = self._shapes[i]
            grad[w_slice] = (activations[i].T @ d_z).ravel()
            grad[b_slice] = d_z.sum(axis=0)
            d_a = d_z @ w.T
        return loss, grad


class SyntheticDataset:
    """Seeded regression stream: normal inputs, noisy teacher-MLP targets.

    The batch for step ``t`` is a pure function of ``(seed, t)`` through a
    counter-based generator, so any step's batch can be regenerated in O(1)
    and resumed runs see exactly the same stream. A designated held-out batch
    lives in a separate key namespace and therefore never appears in the
    training stream unless injected explicitly.
    """

    def __init__(self, input_dim=16, batch_size=32, seed=0, noise=0.05,
                 teacher_dims=None, eval_size=256):
        self.input_dim = int(input_dim)
        self.batch_size = int(batch_size)
        self.seed = int(seed)
        self.noise = float(noise)
        self.eval_size = int(eval_size)
        dims = teacher_dims if teacher_dims is not None else (input_dim, 64, 64, 1)
        self.teacher = TinyMlp(dims)
        self.teacher_theta = self.teacher.init_params(spawn_rng(self.seed, _KEY_TEACHER))

    def _make_batch(self, rng: np.random.Generator, size: int):
        inputs = rng.standard_normal((size, self.input_dim))
        clean = self.teacher.forward(self.teacher_theta, inputs)
        targets = clean + self.noise * rng.standard_normal(clean.shape)
        return inputs, targets

    def batch(self, t: int):
        """Training batch for step t >= 1."""
        return self._make_batch(spawn_rng(self.seed, _KEY_TRAIN, t), self.batch_size)

    def heldout_batch(self):
        """The designated held-out batch, disjoint from the training stream."""
        return self._make_batch(spawn_rng(self.seed, _KEY_HELDOUT, 0), self.batch_size)

    def eval_batch(self):
        """A larger fixed batch for low-variance loss evaluation."""
        return self._make_batch(spawn_rng(self.seed, _KEY_EVAL, 0), self.eval_size)

    def init_rng(self) -> np.random.Generator:
        """Generator reserved for model parameter initialization."""
        return spawn_rng(self.seed, _KEY_INIT)


def finite_difference_grad(loss_fn, theta, rel_step=1e-5) -> np.ndarray:
    """Central differences with per-coordinate step ``rel_step*max(1, |x_i|)``."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        h = rel_step * max(1.0, abs(theta[i]))
        up = theta.copy()
        up[i] += h
        down = theta.copy()
        down[i] -= h
        grad[i] = (loss_fn(up) - loss_fn(down)) / (2.0 * h)
    return grad


def gradient_check(testbed, theta, batch=None, rel_step=1e-5) -> float:
    """Relative disagreement between analytic and finite-difference gradients.

    Returns ||g_analytic - g_fd|| / max(1, ||g_analytic||, ||g_fd||).
    """
    analytic = testbed.grad(theta, batch)
    fd = finite_difference_grad(lambda x: testbed.loss(x, batch), theta, rel_step)
    num = float(np.linalg.norm(analytic - fd))
    den = max(1.0, float(np.linalg.norm(analytic)), float(np.linalg.norm(fd)))
    return num / den
