"""Small Elman recurrent network trained by truncated backpropagation.

    h_t = tanh(W_x u_t + W_h h_{t-1} + b_h)
    y_t = W_y h_t + b_y

Plain numpy, float64 throughout. Sequences are processed in windows of
``window`` steps; the hidden state is carried between windows but gradients
are not.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "swarmdiff-rnn"
CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W_x", "W_h", "b_h", "W_y", "b_y")


class TrainingDivergedError(RuntimeError):
    pass


def init_params(input_width: int, hidden: int, outputs: int, seed: int | None) -> dict:
    rng = np.random.default_rng(seed)
    scale_x = 1.0 / np.sqrt(input_width)
    scale_h = 1.0 / np.sqrt(hidden)
    return {
        "W_x": rng.normal(0.0, scale_x, (hidden, input_width)),
        "W_h": rng.normal(0.0, scale_h, (hidden, hidden)) * 0.5,
        "b_h": np.zeros(hidden),
        "W_y": rng.normal(0.0, scale_h, (outputs, hidden)),
        "b_y": np.zeros(outputs),
    }


def forward(params: dict, X: np.ndarray, h0: np.ndarray):
    """Run a window. ``X`` is (T, B, I), ``h0`` is (B, H).

    Returns outputs (T, B, O) and hidden states (T + 1, B, H), ``hs[0] = h0``.
    """
    T = X.shape[0]
    hs = np.empty((T + 1, *h0.shape))
    hs[0] = h0
    for t in range(T):
        hs[t + 1] = np.tanh(X[t] @ params["W_x"].T + hs[t] @ params["W_h"].T + params["b_h"])
    Y = hs[1:] @ params["W_y"].T + params["b_y"]
    return Y, hs


def loss_and_grads(params: dict, X, targets, mask, h0):
    """Masked mean squared error over a window and its exact gradients."""
    Y, hs = forward(params, X, h0)
    weight = mask.sum()
    if weight == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in params.items()}, hs[-1]
    err = np.where(mask, Y - np.nan_to_num(targets), 0.0)
    loss = float((err**2).sum() / weight)

    dY = 2.0 * err / weight  # (T, B, O)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["W_y"] = np.einsum("tbo,tbh->oh", dY, hs[1:])
    grads["b_y"] = dY.sum(axis=(0, 1))
    dh_next = np.zeros_like(h0)
    for t in reversed(range(X.shape[0])):
        dh = dY[t] @ params["W_y"] + dh_next
        dz = dh * (1.0 - hs[t + 1] ** 2)
        grads["W_x"] += dz.T @ X[t]
        grads["W_h"] += dz.T @ hs[t]
        grads["b_h"] += dz.sum(axis=0)
        dh_next = dz @ params["W_h"]
    return loss, grads, hs[-1]


@dataclass
class TrainingReport:
    final_loss: float
    losses: list[float] = field(default_factory=list)


class _Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in params:
            self.m[k] = b1 * self.m[k] + (1 - b1) * grads[k]
            self.v[k] = b2 * self.v[k] + (1 - b2) * grads[k] ** 2
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _stack_streams(inputs, targets, streams: int):
    """Arrange sequences as a (T, B, .) batch plus mask.

    A single sequence is cut into ``streams`` contiguous pieces so they can
    be processed side by side.
    """
    if isinstance(inputs, np.ndarray):
        inputs, targets = [inputs], [targets]
        if streams > 1:
            n = inputs[0].shape[0]
            cuts = np.linspace(0, n, min(streams, max(n // 16, 1)) + 1).astype(int)
            inputs = [inputs[0][a:b] for a, b in zip(cuts[:-1], cuts[1:])]
            targets = [targets[0][a:b] for a, b in zip(cuts[:-1], cuts[1:])]
    T = max(x.shape[0] for x in inputs)
    B = len(inputs)
    width = inputs[0].shape[1]
    outs = np.atleast_2d(targets[0].T).T.shape[1]
    X = np.zeros((T, B, width))
    Yt = np.full((T, B, outs), np.nan)
    for b, (x, y) in enumerate(zip(inputs, targets)):
        y = y.reshape(len(y), -1)
        X[: len(x), b] = np.nan_to_num(x)
        Yt[: len(y), b] = y
        # rows whose inputs are unknown carry no training signal
        Yt[: len(x), b][np.isnan(x).any(axis=1)] = np.nan
    return X, Yt, ~np.isnan(Yt)


class RecurrentPredictor:
    """Elman network mapping wavelet rows to an r-step-ahead forecast.

    ``outputs`` > 1 gives several heads sharing one hidden layer.
    """

    def __init__(
        self,
        input_width: int,
        hidden: int = 16,
        outputs: int = 1,
        horizon: int = 6,
        seed: int | None = 0,
        zero: bool = False,
    ):
        self.input_width = input_width
        self.hidden = hidden
        self.outputs = outputs
        self.horizon = horizon
        self.seed = seed
        self.params = init_params(input_width, hidden, outputs, seed)
        if zero:
            self.params = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.state = np.zeros(hidden)

    def reset(self) -> None:
        self.state = np.zeros(self.hidden)

    def predict(self, row) -> np.ndarray | float:
        """Feed one row, advance the hidden state, return the forecast."""
        row = np.asarray(row, dtype=float)
        if row.shape != (self.input_width,):
            raise ValueError(f"expected a row of width {self.input_width}, got {row.shape}")
        p = self.params
        self.state = np.tanh(p["W_x"] @ row + p["W_h"] @ self.state + p["b_h"])
        y = p["W_y"] @ self.state + p["b_y"]
        return float(y[0]) if self.outputs == 1 else y

    def predict_sequence(self, rows) -> np.ndarray:
        """Forecasts for every row of ``rows`` from a fresh state (NaN rows give NaN)."""
        self.reset()
        out = np.full((len(rows), self.outputs), np.nan)
        for t, row in enumerate(np.asarray(rows, dtype=float)):
            if np.isnan(row).any():
                continue
            out[t] = self.predict(row)
        return out[:, 0] if self.outputs == 1 else out

    def train(
        self,
        inputs,
        targets,
        epochs: int = 500,
        learning_rate: float = 1e-2,
        seed: int | None = None,
        window: int = 16,
        streams: int = 8,
        clip: float = 5.0,
    ) -> TrainingReport:
        """Fit by truncated BPTT with Adam.

        ``inputs``/``targets`` are one (T, I)/(T[, O]) pair or lists of such
        pairs. NaN targets (or NaN input rows) are masked out of the loss.
        Passing ``seed`` re-initialises the weights first.
        """
        if seed is not None:
            self.seed = seed
            self.params = init_params(self.input_width, self.hidden, self.outputs, seed)
        X, Yt, mask = _stack_streams(inputs, targets, streams)
        if X.shape[2] != self.input_width:
            raise ValueError(f"inputs have width {X.shape[2]}, expected {self.input_width}")
        if Yt.shape[2] != self.outputs:
            raise ValueError(f"targets have {Yt.shape[2]} columns, expected {self.outputs}")
        if mask.sum() == 0:
            raise ValueError("no usable training rows")
        opt = _Adam(self.params, learning_rate)
        losses = []
        T, B = X.shape[:2]
        for epoch in range(epochs):
            h = np.zeros((B, self.hidden))
            total, weight = 0.0, 0
            for start in range(0, T, window):
                sl = slice(start, start + window)
                loss, grads, h = loss_and_grads(self.params, X[sl], Yt[sl], mask[sl], h)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(
                        f"loss became {loss} at epoch {epoch}; lower the learning rate "
                        f"(currently {learning_rate})"
                    )
                n = int(mask[sl].sum())
                if n == 0:
                    continue
                norm = np.sqrt(sum(float((g**2).sum()) for g in grads.values()))
                if norm > clip:
                    grads = {k: g * (clip / norm) for k, g in grads.items()}
                opt.step(self.params, grads)
                total += loss * n
                weight += n
            losses.append(total / weight)
            if epoch % 100 == 0:
                log.debug("epoch %d loss %.6g", epoch, losses[-1])
        self.reset()
        return TrainingReport(losses[-1], losses)

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "hyperparameters": {
                "input_width": self.input_width,
                "hidden": self.hidden,
                "outputs": self.outputs,
                "horizon": self.horizon,
                "seed": self.seed,
            },
            "weights": {k: self.params[k].tolist() for k in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RecurrentPredictor":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a swarmdiff recurrent-network checkpoint")
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')}")
        net = cls(**data["hyperparameters"])
        net.params = {k: np.asarray(data["weights"][k], dtype=float) for k in PARAM_NAMES}
        return net


def save_checkpoint(path, predictor: RecurrentPredictor, extra: dict | None = None) -> None:
    data = predictor.to_dict()
    if extra:
        data["extra"] = extra
    Path(path).write_text(json.dumps(data, indent=1))


def load_checkpoint(path) -> tuple[RecurrentPredictor, dict]:
    data = json.loads(Path(path).read_text())
    return RecurrentPredictor.from_dict(data), data.get("extra", {})
