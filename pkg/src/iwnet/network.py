"""
The weighting network: a ReLU multilayer perceptron with one linear output,
hand-written backpropagation and Adam.
"""

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MlpModel:
    """Fully connected ReLU network with a single linear output.

    ``weights[l]`` has shape (fan_in, fan_out); inputs are row vectors, so a
    layer computes ``h @ weights[l] + biases[l]``.
    """

    weights: list
    biases: list

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    @property
    def hidden_layers(self):
        return len(self.weights) - 1

    def params(self):
        """Parameters in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def copy(self):
        return MlpModel([w.copy() for w in self.weights],
                        [b.copy() for b in self.biases])

    def to_dict(self):
        return {
            "layers": [
                {"shape": list(w.shape), "weights": w.ravel().tolist(),
                 "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ]
        }

    @classmethod
    def from_dict(cls, doc):
        weights, biases = [], []
        for layer in doc["layers"]:
            weights.append(np.asarray(layer["weights"], dtype=float)
                           .reshape(layer["shape"]))
            biases.append(np.asarray(layer["bias"], dtype=float))
        return cls(weights, biases)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def mlp_init(input_dim, hidden_layers=3, hidden_units=100, seed=None):
    """Glorot-uniform weights, zero biases.

    ``hidden_layers=0`` gives a linear model ``x @ u + b``.
    """
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if hidden_layers < 0:
        raise ValueError("hidden_layers must be >= 0")
    rng = np.random.Generator(np.random.Philox(seed))
    widths = [input_dim] + [hidden_units] * hidden_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def mlp_forward(model, x):
    """Forward pass.

    Returns the outputs as a vector of shape (B,) and a cache holding each
    layer's input and pre-activation for :func:`mlp_backward`.
    """
    h = np.asarray(x, dtype=float)
    if h.ndim != 2 or h.shape[1] != model.input_dim:
        raise ValueError(
            f"expected input of shape (B, {model.input_dim}), got {h.shape}")
    inputs, pre = [], []
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if l < last else z
    return h[:, 0], (inputs, pre)


def mlp_backward(model, cache, grad_out):
    """Gradients of ``sum_i grad_out[i] * output[i]`` w.r.t. every parameter.

    Returned in the order of :meth:`MlpModel.params`.  ReLU'(0) is 0.
    """
    inputs, pre = cache
    grad_out = np.asarray(grad_out, dtype=float).ravel()
    if len(inputs) != len(model.weights) or pre[-1].shape[0] != len(grad_out):
        raise ValueError("cache does not match this model / gradient")
    delta = grad_out[:, None]
    grads = [None] * (2 * len(model.weights))
    for l in range(len(model.weights) - 1, -1, -1):
        grads[2 * l] = inputs[l].T @ delta
        grads[2 * l + 1] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l].T) * (pre[l - 1] > 0)
    return grads


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    step_count: int = 0
    first_moments: list = field(default_factory=list)
    second_moments: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=0.001, **kwargs):
        return cls(lr=lr,
                   first_moments=[np.zeros_like(p) for p in params],
                   second_moments=[np.zeros_like(p) for p in params],
                   **kwargs)


def adam_step(params, grads, state):
    """One bias-corrected Adam step, updating ``params`` and ``state`` in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moments):
        raise ValueError("params, grads and Adam state do not match")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.first_moments,
                          state.second_moments):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class PretrainResult:
    model: MlpModel
    epochs: int
    mse: float
    converged: bool


def pretrain_to_one(model, source_x, max_epochs=100, tol=2e-4, batch_size=256,
                    lr=0.01, seed=None):
    """Fit the network to output 1 everywhere with mini-batch Adam.

    Stops once the full-sample mean squared error drops below ``tol`` (checked
    before each epoch) or after ``max_epochs``.  The model is updated in place
    and also returned inside the result.
    """
    x = np.asarray(source_x, dtype=float)
    if len(x) == 0:
        raise ValueError("source_x is empty")
    rng = np.random.Generator(np.random.Philox(seed))
    params = model.params()
    state = AdamState.for_params(params, lr=lr)
    m = len(x)
    epoch = 0
    while True:
        out, _ = mlp_forward(model, x)
        mse = float(np.mean((out - 1.0) ** 2))
        if mse < tol or epoch >= max_epochs:
            break
        order = rng.permutation(m)
        for start in range(0, m, batch_size):
            idx = order[start:start + batch_size]
            out_b, cache = mlp_forward(model, x[idx])
            grads = mlp_backward(model, cache, 2.0 * (out_b - 1.0) / len(idx))
            adam_step(params, grads, state)
        epoch += 1
    return PretrainResult(model, epoch, mse, mse < tol)
