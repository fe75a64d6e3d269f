"""Dense feed-forward networks with hand-rolled backprop and Adam.

Everything runs in 64-bit numpy.  Inputs may be a single vector or a
batch (rows = samples); parameters are the flat list
[W1, b1, W2, b2, ...] that the Adam state and the soft updates share.
"""

from __future__ import annotations

import math

import numpy as np


class Mlp:
    """Rectified-linear MLP with a tanh or identity output layer.

    Weights and biases start uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
    which keeps early activations inside the useful range of both
    nonlinearities.
    """

    def __init__(self, sizes, output: str = "identity",
                 rng: np.random.Generator | None = None):
        if output not in ("tanh", "identity"):
            raise ValueError(f"unknown output activation {output!r}")
        if len(sizes) < 2:
            raise ValueError("need at least input and output dimensions")
        if rng is None:
            rng = np.random.default_rng()
        self.sizes = [int(s) for s in sizes]
        self.output = output
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list, alternating weight matrix and bias vector."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(
                f"input has {x.shape[-1]} features, network expects {self.sizes[0]}")
        return x

    def forward(self, x):
        """Plain forward pass; accepts (n,) or (batch, n) input."""
        h = self._check_input(x)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        out = h @ self.weights[-1] + self.biases[-1]
        if self.output == "tanh":
            out = np.tanh(out)
        return out

    def forward_cached(self, x):
        """Forward pass that returns (output, cache) for :meth:`backward`."""
        h = self._check_input(x)
        activations = [h]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            activations.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        if self.output == "tanh":
            out = np.tanh(out)
        return out, (activations, out)

    def backward(self, cache, grad_output, with_param_grads: bool = True):
        """Backpropagate an upstream gradient through a cached forward pass.

        Args:
            cache: second element returned by :meth:`forward_cached`.
            grad_output: gradient w.r.t. the network output, same shape.
            with_param_grads: skip parameter gradients when only the
                input gradient is needed (critic-through-action path).

        Returns:
            (param_grads, input_grad) where param_grads matches
            :meth:`parameters` order (or None when skipped).
        """
        activations, out = cache
        grad = np.asarray(grad_output, dtype=np.float64)
        if grad.shape != out.shape:
            raise ValueError(f"upstream gradient shape {grad.shape} != output {out.shape}")
        if self.output == "tanh":
            grad = grad * (1.0 - out ** 2)

        batched = grad.ndim == 2
        param_grads = [None] * (2 * len(self.weights)) if with_param_grads else None
        for layer in range(len(self.weights) - 1, -1, -1):
            h_in = activations[layer]
            if with_param_grads:
                if batched:
                    grad_w = h_in.T @ grad
                    grad_b = grad.sum(axis=0)
                else:
                    grad_w = np.outer(h_in, grad)
                    grad_b = grad.copy()
                param_grads[2 * layer] = grad_w
                param_grads[2 * layer + 1] = grad_b
            grad = grad @ self.weights[layer].T
            if layer > 0:
                grad = grad * (activations[layer] > 0.0)
        return param_grads, grad


class AdamState:
    """Moment accumulators and step counter for one parameter list."""

    def __init__(self, params, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_update(state: AdamState, params, grads) -> None:
    """One bias-corrected Adam step, updating ``params`` in place."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("parameter/gradient lists do not match optimizer state")
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Move every target parameter toward the online one: tau*w + (1-tau)*w'."""
    for t, o in zip(target.parameters(), online.parameters()):
        t *= 1.0 - tau
        t += tau * o


def clone_network(net: Mlp) -> Mlp:
    """Exact structural and numerical copy (used for target networks)."""
    copy = Mlp(net.sizes, output=net.output, rng=np.random.default_rng(0))
    copy.weights = [w.copy() for w in net.weights]
    copy.biases = [b.copy() for b in net.biases]
    return copy
