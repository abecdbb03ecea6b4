#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Neural Network Core
-----------------------------
Minimal feed-forward network with reverse-mode gradients and an optimizer,
shared by the behavior learner and the dynamics learner
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.constants import NETWORK_FORMAT_VERSION
from core.errors import NumericError, ShapeError
from utils.logger import get_logger

HIDDEN_ACTIVATIONS = ("relu",)
OUTPUT_ACTIVATIONS = ("identity", "tanh")

logger = get_logger("hiernav.nncore")


@dataclass
class Gradients:
    """Gradients of a scalar loss w.r.t. every parameter and the input"""

    weights: list
    biases: list
    inputs: np.ndarray = None

    def is_finite(self):
        return all(np.all(np.isfinite(g)) for g in self.weights + self.biases)


class Mlp:
    """Feed-forward network: ReLU hidden layers, identity or tanh output"""

    def __init__(
        self,
        layer_sizes,
        hidden_activation="relu",
        output_activation="identity",
        rng=None,
    ):
        """
        Create a network with weights drawn uniformly in +-1/sqrt(fan_in)

        Args:
            layer_sizes (list[int]): Sizes from input to output, at least two entries
            hidden_activation (str): "relu"
            output_activation (str): "identity" or "tanh"
            rng (np.random.Generator, optional): Source of the initial weights
        """
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2:
            raise ShapeError(f"need at least input and output sizes, got {layer_sizes}")
        if layer_sizes[0] < 0 or any(s <= 0 for s in layer_sizes[1:]):
            raise ShapeError(f"invalid layer sizes {layer_sizes}")
        if hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unsupported hidden activation: {hidden_activation}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unsupported output activation: {output_activation}")

        self.layer_sizes = layer_sizes
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation

        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in) if fan_in > 0 else 1.0
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @classmethod
    def zeros(cls, layer_sizes, **kwargs):
        """Network with every parameter set to zero"""
        net = cls(layer_sizes, **kwargs)
        for w, b in zip(net.weights, net.biases):
            w.fill(0.0)
            b.fill(0.0)
        return net

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    def parameters(self):
        """Weights followed by biases, in layer order"""
        return self.weights + self.biases

    def same_architecture(self, other):
        return (
            self.layer_sizes == other.layer_sizes
            and self.hidden_activation == other.hidden_activation
            and self.output_activation == other.output_activation
        )

    def copy(self):
        twin = Mlp.__new__(Mlp)
        twin.layer_sizes = list(self.layer_sizes)
        twin.hidden_activation = self.hidden_activation
        twin.output_activation = self.output_activation
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x.reshape(1, -1) if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise ShapeError(
                f"input shape {x.shape} does not match input dimension {self.input_dim}"
            )
        return batch, single

    def _forward_cached(self, batch):
        activations = [batch]
        pre_activations = []
        a = batch
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            pre_activations.append(z)
            if i < last:
                a = np.maximum(z, 0.0)
            elif self.output_activation == "tanh":
                a = np.tanh(z)
            else:
                a = z
            activations.append(a)
        return activations, pre_activations

    def forward(self, x):
        """
        Evaluate the network

        Args:
            x (np.ndarray): Input of shape (input_dim,) or (batch, input_dim)

        Returns:
            np.ndarray: Output with the same leading shape as the input
        """
        batch, single = self._as_batch(x)
        activations, _ = self._forward_cached(batch)
        out = activations[-1]
        return out[0] if single else out

    __call__ = forward

    def backward(self, x, upstream_grad):
        """
        Reverse-mode pass for the loss sum(upstream_grad * forward(x))

        Args:
            x (np.ndarray): Input of shape (input_dim,) or (batch, input_dim)
            upstream_grad (np.ndarray): dLoss/dOutput, same leading shape as x

        Returns:
            Gradients: Parameter gradients summed over the batch, plus input gradient
        """
        batch, single = self._as_batch(x)
        upstream = np.asarray(upstream_grad, dtype=np.float64).reshape(
            batch.shape[0], -1
        )
        if upstream.shape[1] != self.output_dim:
            raise ShapeError(
                f"upstream gradient has {upstream.shape[1]} columns, "
                f"expected {self.output_dim}"
            )

        activations, pre_activations = self._forward_cached(batch)
        if self.output_activation == "tanh":
            delta = upstream * (1.0 - activations[-1] ** 2)
        else:
            delta = upstream

        n_layers = len(self.weights)
        grad_w = [None] * n_layers
        grad_b = [None] * n_layers
        for i in range(n_layers - 1, -1, -1):
            grad_w[i] = delta.T @ activations[i]
            grad_b[i] = delta.sum(axis=0)
            upstream_in = delta @ self.weights[i]
            if i > 0:
                # ReLU subgradient at exactly zero is zero
                delta = upstream_in * (pre_activations[i - 1] > 0.0)
        inputs = upstream_in[0] if single else upstream_in
        return Gradients(weights=grad_w, biases=grad_b, inputs=inputs)

    def to_dict(self):
        return {
            "version": NETWORK_FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "activations": {
                "hidden": self.hidden_activation,
                "output": self.output_activation,
            },
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("version", NETWORK_FORMAT_VERSION) != NETWORK_FORMAT_VERSION:
            raise ValueError(f"unsupported network format version {data['version']}")
        activations = data.get("activations", {})
        net = cls(
            data["layer_sizes"],
            hidden_activation=activations.get("hidden", "relu"),
            output_activation=activations.get("output", "identity"),
        )
        for i, (fan_in, fan_out) in enumerate(
            zip(net.layer_sizes[:-1], net.layer_sizes[1:])
        ):
            w = np.asarray(data["weights"][i], dtype=np.float64).reshape(fan_out, fan_in)
            b = np.asarray(data["biases"][i], dtype=np.float64).reshape(fan_out)
            net.weights[i] = w
            net.biases[i] = b
        return net

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class Optimizer:
    """Stochastic-gradient optimizer, plain SGD or Adam"""

    def __init__(
        self, learning_rate=1e-3, variant="adam", beta1=0.9, beta2=0.999, epsilon=1e-8
    ):
        if learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {learning_rate}")
        if variant not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer variant: {variant}")
        self.learning_rate = float(learning_rate)
        self.variant = variant
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self._m = None
        self._v = None

    def step(self, net, grads):
        """Update the parameters of net in place"""
        flat_grads = grads.weights + grads.biases
        params = net.parameters()
        if len(flat_grads) != len(params) or any(
            g.shape != p.shape for g, p in zip(flat_grads, params)
        ):
            raise ShapeError("gradient shapes do not match the network")
        if not grads.is_finite():
            raise NumericError("non-finite gradient component")

        if self.variant == "sgd":
            for p, g in zip(params, flat_grads):
                p -= self.learning_rate * g
            return net

        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, flat_grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + self.epsilon
            )
        return net


def forward(net, x):
    """Evaluate net on x"""
    return net.forward(x)


def backward(net, x, upstream_grad):
    """Gradients of sum(upstream_grad * net(x))"""
    return net.backward(x, upstream_grad)


def apply_gradients(net, grads, opt):
    """One optimizer step on net; returns the updated network"""
    return opt.step(net, grads)


def polyak_update(target, source, rho):
    """
    target <- rho * target + (1 - rho) * source, in place

    Args:
        target (Mlp): Network being smoothed
        source (Mlp): Network providing new values
        rho (float): Interpolation factor in [0, 1]

    Returns:
        Mlp: The updated target
    """
    if not target.same_architecture(source):
        raise ShapeError(
            f"architecture mismatch: {target.layer_sizes} vs {source.layer_sizes}"
        )
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    for t_param, s_param in zip(target.parameters(), source.parameters()):
        t_param *= rho
        t_param += (1.0 - rho) * s_param
    return target
