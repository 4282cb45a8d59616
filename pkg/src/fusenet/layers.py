"""Differentiable layers: dense, LSTM cell, bidirectional encoder, attention.

Each layer is immutable during a (forward, backward) pair: forward
returns an explicit cache, backward consumes it and returns input
gradients plus a dict of parameter gradients shaped exactly like the
parameters. Nothing here mutates parameters, so independent examples
can be processed concurrently and their gradients summed afterwards.

Weight convention follows the dense form y = act(W^T x + b) with W
stored as (in, out). LSTM gates act on the concatenation [h_prev, x_t]
through one (hidden+input, hidden) matrix per gate.
"""

from __future__ import annotations

import numpy as np

from .numcore import Rng, ShapeError, affine, glorot_uniform, sigmoid, softmax

ACTIVATIONS = ("identity", "relu", "sigmoid", "tanh")


class AllMaskedError(ValueError):
    """Attention over a sequence with no unmasked positions."""


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Derivative w.r.t. the pre-activation z; y is act(z) from forward.
    if name == "identity":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        return y * (1.0 - y)
    if name == "tanh":
        return 1.0 - y * y
    raise ValueError(f"unknown activation {name!r}")


class DenseLayer:
    """y = activation(W^T x + b) with W of shape (in, out)."""

    def __init__(self, W: np.ndarray, b: np.ndarray, activation: str = "identity"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if W.ndim != 2 or b.ndim != 1 or W.shape[1] != b.shape[0]:
            raise ShapeError(f"dense: W{W.shape} incompatible with b{b.shape}")
        self.W = np.asarray(W, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.activation = activation

    @classmethod
    def init(cls, rng: Rng, in_dim: int, out_dim: int, activation: str = "identity"):
        return cls(glorot_uniform(rng, in_dim, out_dim), np.zeros(out_dim), activation)

    @property
    def in_dim(self) -> int:
        return self.W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}

    def forward(self, x: np.ndarray):
        z = affine(self.W, x, self.b)
        y = _act(self.activation, z)
        return y, {"x": x, "z": z, "y": y}

    def backward(self, cache, dy: np.ndarray):
        if dy.shape != cache["z"].shape:
            raise ShapeError(f"dense backward: grad{dy.shape} vs output{cache['z'].shape}")
        dz = dy * _act_grad(self.activation, cache["z"], cache["y"])
        grads = {"W": np.outer(cache["x"], dz), "b": dz.copy()}
        dx = self.W @ dz
        return dx, grads


class LstmCell:
    """Single LSTM step over [h_prev, x_t] with one weight matrix per gate."""

    GATES = ("i", "f", "o", "q")

    def __init__(self, weights: dict[str, np.ndarray], biases: dict[str, np.ndarray]):
        shapes = {weights[g].shape for g in self.GATES}
        if len(shapes) != 1:
            raise ShapeError(f"lstm: gate weight shapes differ: {sorted(shapes)}")
        self.W = {g: np.asarray(weights[g], dtype=np.float64) for g in self.GATES}
        self.b = {g: np.asarray(biases[g], dtype=np.float64) for g in self.GATES}
        concat_dim, hidden = self.W["i"].shape
        if concat_dim <= hidden:
            raise ShapeError(f"lstm: concat dim {concat_dim} must exceed hidden {hidden}")
        self.hidden_dim = hidden
        self.input_dim = concat_dim - hidden

    @classmethod
    def init(cls, rng: Rng, input_dim: int, hidden_dim: int):
        concat = input_dim + hidden_dim
        weights = {g: glorot_uniform(rng, concat, hidden_dim) for g in cls.GATES}
        biases = {g: np.zeros(hidden_dim) for g in cls.GATES}
        biases["f"] = biases["f"] + 1.0  # open forget gate early in training
        return cls(weights, biases)

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for g in self.GATES:
            out[f"W_{g}"] = self.W[g]
        for g in self.GATES:
            out[f"b_{g}"] = self.b[g]
        return out

    def step(self, h_prev: np.ndarray, c_prev: np.ndarray, x_t: np.ndarray):
        if h_prev.shape != (self.hidden_dim,) or x_t.shape != (self.input_dim,):
            raise ShapeError(
                f"lstm step: h{h_prev.shape}, x{x_t.shape} vs "
                f"hidden {self.hidden_dim}, input {self.input_dim}"
            )
        u = np.concatenate([h_prev, x_t])
        i = sigmoid(u @ self.W["i"] + self.b["i"])
        f = sigmoid(u @ self.W["f"] + self.b["f"])
        o = sigmoid(u @ self.W["o"] + self.b["o"])
        q = np.tanh(u @ self.W["q"] + self.b["q"])
        c = f * c_prev + i * q
        tc = np.tanh(c)
        h = o * tc
        cache = {"u": u, "i": i, "f": f, "o": o, "q": q, "c_prev": c_prev, "tc": tc}
        return h, c, cache

    def step_backward(self, cache, dh: np.ndarray, dc: np.ndarray):
        """Gradients for one step given dLoss/dh_t and dLoss/dc_t (from the future)."""
        i, f, o, q, tc = cache["i"], cache["f"], cache["o"], cache["q"], cache["tc"]
        do = dh * tc
        dc_total = dc + dh * o * (1.0 - tc * tc)
        di = dc_total * q
        dq = dc_total * i
        df = dc_total * cache["c_prev"]
        dc_prev = dc_total * f

        dz = {
            "i": di * i * (1.0 - i),
            "f": df * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "q": dq * (1.0 - q * q),
        }
        u = cache["u"]
        grads = {}
        du = np.zeros_like(u)
        for g in self.GATES:
            grads[f"W_{g}"] = np.outer(u, dz[g])
            grads[f"b_{g}"] = dz[g].copy()
            du += self.W[g] @ dz[g]
        dh_prev = du[: self.hidden_dim]
        dx = du[self.hidden_dim :]
        return dh_prev, dc_prev, dx, grads


class BiLstmEncoder:
    """Concatenates a forward and a time-reversed LSTM pass per timestep.

    Padded positions are run through the recurrences like any other input
    (their vectors are zero); exclusion happens downstream at attention.
    """

    def __init__(self, forward_cell: LstmCell, backward_cell: LstmCell):
        if (forward_cell.input_dim, forward_cell.hidden_dim) != (
            backward_cell.input_dim,
            backward_cell.hidden_dim,
        ):
            raise ShapeError("bilstm: forward and backward cells disagree on dims")
        self.fwd = forward_cell
        self.bwd = backward_cell
        self.input_dim = forward_cell.input_dim
        self.hidden_dim = forward_cell.hidden_dim

    @classmethod
    def init(cls, rng: Rng, input_dim: int, hidden_dim: int):
        return cls(LstmCell.init(rng, input_dim, hidden_dim), LstmCell.init(rng, input_dim, hidden_dim))

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden_dim

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, arr in self.fwd.params().items():
            out[f"fwd.{name}"] = arr
        for name, arr in self.bwd.params().items():
            out[f"bwd.{name}"] = arr
        return out

    def forward(self, vectors: np.ndarray):
        """vectors: (T, input_dim) -> H: (T, 2*hidden_dim), plus cache."""
        if vectors.ndim != 2 or vectors.shape[1] != self.input_dim:
            raise ShapeError(f"bilstm: input {vectors.shape} vs input_dim {self.input_dim}")
        T = vectors.shape[0]
        h_dim = self.hidden_dim
        H = np.zeros((T, 2 * h_dim))

        fwd_caches = []
        h = np.zeros(h_dim)
        c = np.zeros(h_dim)
        for t in range(T):
            h, c, cache = self.fwd.step(h, c, vectors[t])
            fwd_caches.append(cache)
            H[t, :h_dim] = h

        bwd_caches = []
        h = np.zeros(h_dim)
        c = np.zeros(h_dim)
        for t in range(T - 1, -1, -1):
            h, c, cache = self.bwd.step(h, c, vectors[t])
            bwd_caches.append(cache)  # index k processed original step T-1-k
            H[t, h_dim:] = h

        return H, {"fwd": fwd_caches, "bwd": bwd_caches, "T": T}

    def backward(self, cache, dH: np.ndarray):
        """Full BPTT; returns (dX, grads) with grads keyed like params()."""
        T = cache["T"]
        h_dim = self.hidden_dim
        if dH.shape != (T, 2 * h_dim):
            raise ShapeError(f"bilstm backward: grad {dH.shape} vs ({T}, {2 * h_dim})")
        dX = np.zeros((T, self.input_dim))
        grads = {name: np.zeros_like(arr) for name, arr in self.params().items()}

        dh = np.zeros(h_dim)
        dc = np.zeros(h_dim)
        for t in range(T - 1, -1, -1):
            dh_prev, dc, dx, g = self.fwd.step_backward(cache["fwd"][t], dH[t, :h_dim] + dh, dc)
            dh = dh_prev
            dX[t] += dx
            for name, arr in g.items():
                grads[f"fwd.{name}"] += arr

        dh = np.zeros(h_dim)
        dc = np.zeros(h_dim)
        for k in range(T - 1, -1, -1):
            t = T - 1 - k  # original timestep the backward cell saw at its step k
            dh_prev, dc, dx, g = self.bwd.step_backward(cache["bwd"][k], dH[t, h_dim:] + dh, dc)
            dh = dh_prev
            dX[t] += dx
            for name, arr in g.items():
                grads[f"bwd.{name}"] += arr

        return dX, grads


class FeedforwardAttention:
    """Scalar-score attention reducing a (T, dim) matrix to one vector.

    Scores are tanh(w . h_t + b), softmax-normalized over unmasked
    positions only; masked positions get exactly zero weight. The output
    is the weighted average of the rows, so it stays inside their convex
    hull.
    """

    def __init__(self, w: np.ndarray, b: np.ndarray):
        if w.ndim != 1 or b.shape != (1,):
            raise ShapeError(f"attention: w{w.shape}, b{b.shape}")
        self.w = np.asarray(w, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)

    @classmethod
    def init(cls, rng: Rng, dim: int):
        return cls(glorot_uniform(rng, dim, 1)[:, 0], np.zeros(1))

    def params(self) -> dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}

    def forward(self, H: np.ndarray, mask: np.ndarray):
        if H.ndim != 2 or H.shape[1] != self.w.shape[0]:
            raise ShapeError(f"attention: H{H.shape} vs w length {self.w.shape[0]}")
        if mask.shape != (H.shape[0],):
            raise ShapeError(f"attention: mask {mask.shape} vs {H.shape[0]} rows")
        mask = mask.astype(bool)
        if not mask.any():
            raise AllMaskedError("attention: no unmasked positions to attend to")

        z = H @ self.w + self.b[0]
        psi = np.tanh(z)
        alphas = np.zeros(H.shape[0])
        live = psi[mask]
        e = np.exp(live - np.max(live))
        alphas[mask] = e / np.sum(e)
        a = alphas @ H
        cache = {"H": H, "mask": mask, "psi": psi, "alphas": alphas}
        return a, alphas, cache

    def backward(self, cache, da: np.ndarray):
        """Gradients w.r.t. w, b and H given dLoss/da."""
        H, mask, psi, alphas = cache["H"], cache["mask"], cache["psi"], cache["alphas"]
        if da.shape != (H.shape[1],):
            raise ShapeError(f"attention backward: grad {da.shape} vs dim {H.shape[1]}")
        dalpha = H @ da
        dH = np.outer(alphas, da)
        # Softmax over unmasked entries: dpsi_t = a_t * (dalpha_t - sum_s a_s dalpha_s)
        inner = float(alphas @ dalpha)
        dpsi = alphas * (dalpha - inner)
        dz = dpsi * (1.0 - psi * psi)
        dz[~mask] = 0.0
        grads = {"w": H.T @ dz, "b": np.array([np.sum(dz)])}
        dH += np.outer(dz, self.w)
        return dH, grads


def softmax_head(head: DenseLayer, x: np.ndarray):
    """Class probabilities from an identity-activation dense head."""
    logits, cache = head.forward(x)
    return softmax(logits), logits, cache
