"""Fully-connected network container: parameters, initialization, checkpoint IO."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MLP_MAGIC = "pic-mlp v1"

# Coefficients of the degree-(3,2) rational approximation of the ramp function,
# used to initialize the trainable per-layer rational activation.
RATIONAL_P_INIT = (0.0218, 0.5, 1.5957, 1.1915)
RATIONAL_Q_INIT = (1.0, 0.0, 2.383)

DEFAULT_WIDTHS = (2, 50, 50, 50, 50, 50, 1)


@dataclass
class Mlp:
    """MLP parameters. ``weights[l]`` has shape (in, out); hidden layers share
    an activation kind; the rational activation carries trainable numerator and
    denominator coefficients per hidden layer."""

    widths: tuple[int, ...]
    activation: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    rat_p: list[np.ndarray]
    rat_q: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def parameters(self) -> list[np.ndarray]:
        """All trainable arrays in a fixed order (weights/biases, then
        per-hidden-layer rational coefficients)."""
        params: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        if self.activation == "rational":
            for p, q in zip(self.rat_p, self.rat_q):
                params.extend((p, q))
        return params

    def copy(self) -> "Mlp":
        return Mlp(
            widths=self.widths,
            activation=self.activation,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            rat_p=[p.copy() for p in self.rat_p],
            rat_q=[q.copy() for q in self.rat_q],
        )

    @property
    def dtype(self):
        return self.weights[0].dtype

    def astype(self, dtype) -> "Mlp":
        return Mlp(
            widths=self.widths,
            activation=self.activation,
            weights=[w.astype(dtype) for w in self.weights],
            biases=[b.astype(dtype) for b in self.biases],
            rat_p=[p.astype(dtype) for p in self.rat_p],
            rat_q=[q.astype(dtype) for q in self.rat_q],
        )

    def set_parameters(self, params: list[np.ndarray]) -> None:
        for dst, src in zip(self.parameters(), params):
            np.copyto(dst, src)


def init_mlp(widths=DEFAULT_WIDTHS, activation: str = "rational", seed: int = 0) -> Mlp:
    """Xavier-uniform weights, zero biases, standard rational coefficients."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 3:
        raise ValueError("need at least input, one hidden and output width")
    if activation not in ("sin", "rational"):
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    n_hidden = len(widths) - 2
    rat_p = [np.array(RATIONAL_P_INIT, dtype=float) for _ in range(n_hidden)]
    rat_q = [np.array(RATIONAL_Q_INIT, dtype=float) for _ in range(n_hidden)]
    return Mlp(widths, activation, weights, biases, rat_p, rat_q)


def save_mlp(net: Mlp, path) -> None:
    """Versioned text checkpoint at 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MLP_MAGIC + "\n")
        fh.write(" ".join(str(w) for w in net.widths) + "\n")
        fh.write(net.activation + "\n")
        for arr in net.parameters():
            fh.write(" ".join(f"{v:.17g}" for v in np.ravel(arr)) + "\n")


def load_mlp(path) -> Mlp:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != MLP_MAGIC:
        raise ValueError(f"bad header: expected {MLP_MAGIC!r}")
    widths = tuple(int(tok) for tok in lines[1].split())
    activation = lines[2]
    net = init_mlp(widths, activation, seed=0)
    params = net.parameters()
    if len(lines) != 3 + len(params):
        raise ValueError(f"expected {3 + len(params)} lines, found {len(lines)}")
    for arr, line in zip(params, lines[3:]):
        flat = np.array([float(tok) for tok in line.split()])
        if flat.size != arr.size:
            raise ValueError("parameter count mismatch in checkpoint")
        np.copyto(arr, flat.reshape(arr.shape))
    return net
