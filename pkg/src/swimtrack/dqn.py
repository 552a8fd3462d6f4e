"""Two-head Q-network, replay memory and double-DQN updates in plain numpy.

All network parameters live in one flat vector ``theta``; the per-layer
weight matrices are views into it, so soft updates, optimizers and
checkpoints operate on a single array.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class NetworkShapeError(ValueError):
    pass


class TrainingFault(FloatingPointError):
    pass


class QNetwork:
    """Shared ReLU trunk feeding two linear heads (yaw and pitch)."""

    def __init__(self, n_in: int, hidden=(128, 128), n_yaw: int = 7, n_pitch: int = 7,
                 seed: int | None = 0, theta: np.ndarray | None = None):
        self.n_in = int(n_in)
        self.hidden = tuple(int(h) for h in hidden)
        self.n_yaw = int(n_yaw)
        self.n_pitch = int(n_pitch)
        widths = (self.n_in,) + self.hidden
        self.shapes = [(a, b) for a, b in zip(widths[:-1], widths[1:])]
        self.shapes += [(widths[-1], self.n_yaw), (widths[-1], self.n_pitch)]
        self.size = sum(a * b + b for a, b in self.shapes)
        if theta is None:
            theta = self._init_params(np.random.default_rng(seed))
        elif theta.shape != (self.size,):
            raise NetworkShapeError(f"expected {self.size} parameters, got {theta.shape}")
        self.theta = np.array(theta, dtype=np.float64)
        self._bind()

    def _init_params(self, rng: np.random.Generator) -> np.ndarray:
        parts = []
        for fan_in, fan_out in self.shapes:
            bound = 1.0 / np.sqrt(fan_in)
            parts.append(rng.uniform(-bound, bound, fan_in * fan_out))
            parts.append(np.zeros(fan_out))
        return np.concatenate(parts)

    def _bind(self) -> None:
        self.layers = _views(self.theta, self.shapes)

    @property
    def trunk(self):
        return self.layers[:-2]

    @property
    def head_yaw(self):
        return self.layers[-2]

    @property
    def head_pitch(self):
        return self.layers[-1]

    def copy(self) -> "QNetwork":
        return QNetwork(self.n_in, self.hidden, self.n_yaw, self.n_pitch, theta=self.theta.copy())

    def same_architecture(self, other: "QNetwork") -> bool:
        return self.shapes == other.shapes

    def _check(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if s.shape[-1] != self.n_in:
            raise NetworkShapeError(f"input has {s.shape[-1]} features, network expects {self.n_in}")
        return s

    def forward(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Q-vectors for one state ``(n_in,)`` or a batch ``(B, n_in)``."""
        h = self._check(s)
        for W, b in self.trunk:
            h = np.maximum(h @ W + b, 0.0)
        (Wy, by), (Wp, bp) = self.head_yaw, self.head_pitch
        return h @ Wy + by, h @ Wp + bp

    __call__ = forward

    def loss_and_grad(self, s, a_yaw, a_pitch, t_yaw, t_pitch) -> tuple[float, np.ndarray]:
        """Mean over the batch of 0.5*[(Q_yaw - t_yaw)^2 + (Q_pitch - t_pitch)^2]
        at the taken actions, with its gradient w.r.t. ``theta``."""
        s = self._check(s)
        if s.ndim == 1:
            s = s[None, :]
        n = s.shape[0]
        rows = np.arange(n)
        acts = [s]
        h = s
        for W, b in self.trunk:
            h = np.maximum(h @ W + b, 0.0)
            acts.append(h)
        (Wy, by), (Wp, bp) = self.head_yaw, self.head_pitch
        qy = h @ Wy + by
        qp = h @ Wp + bp
        ey = qy[rows, a_yaw] - t_yaw
        ep = qp[rows, a_pitch] - t_pitch
        loss = 0.5 * float(np.mean(ey * ey + ep * ep))
        if not np.isfinite(loss):
            raise TrainingFault(f"non-finite loss {loss}")

        grad = np.empty_like(self.theta)
        gviews = _views(grad, self.shapes)
        dqy = np.zeros_like(qy)
        dqy[rows, a_yaw] = ey / n
        dqp = np.zeros_like(qp)
        dqp[rows, a_pitch] = ep / n
        gviews[-2][0][...] = h.T @ dqy
        gviews[-2][1][...] = dqy.sum(0)
        gviews[-1][0][...] = h.T @ dqp
        gviews[-1][1][...] = dqp.sum(0)
        dh = dqy @ Wy.T + dqp @ Wp.T
        for i in range(len(self.trunk) - 1, -1, -1):
            W, _ = self.trunk[i]
            dz = dh * (acts[i + 1] > 0)
            gviews[i][0][...] = acts[i].T @ dz
            gviews[i][1][...] = dz.sum(0)
            dh = dz @ W.T
        return loss, grad


def _views(flat: np.ndarray, shapes) -> list[tuple[np.ndarray, np.ndarray]]:
    out, k = [], 0
    for a, b in shapes:
        W = flat[k:k + a * b].reshape(a, b)
        k += a * b
        bias = flat[k:k + b]
        k += b
        out.append((W, bias))
    return out


@dataclass
class Batch:
    s: np.ndarray
    a_yaw: np.ndarray
    a_pitch: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


class ReplayMemory:
    """Fixed-capacity ring buffer; the oldest experience is evicted first."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, state_dim))
        self.s_next = np.zeros((capacity, state_dim))
        self.a_yaw = np.zeros(capacity, dtype=np.int64)
        self.a_pitch = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.next = 0
        self.pushed = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s, a_yaw: int, a_pitch: int, r: float, s_next, terminal: bool = False) -> None:
        i = self.next
        self.s[i] = s
        self.a_yaw[i] = a_yaw
        self.a_pitch[i] = a_pitch
        self.r[i] = r
        self.s_next[i] = s_next
        self.terminal[i] = terminal
        self.next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.pushed += 1

    def ordered_indices(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        start = self.next if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if batch_size > self.size:
            raise ValueError(f"cannot sample {batch_size} from {self.size} experiences")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return self.take(idx)

    def save(self, path: str | Path) -> None:
        idx = self.ordered_indices()
        np.savez(path, s=self.s[idx], a_yaw=self.a_yaw[idx], a_pitch=self.a_pitch[idx], r=self.r[idx],
                 s_next=self.s_next[idx], terminal=self.terminal[idx], capacity=self.capacity)

    @classmethod
    def load(cls, path: str | Path, capacity: int | None = None) -> "ReplayMemory":
        with np.load(path) as d:
            mem = cls(int(capacity or d["capacity"]), d["s"].shape[1])
            for row in zip(d["s"], d["a_yaw"], d["a_pitch"], d["r"], d["s_next"], d["terminal"]):
                mem.push(*row)
        return mem

    def take(self, idx) -> Batch:
        return Batch(self.s[idx], self.a_yaw[idx], self.a_pitch[idx], self.r[idx],
                     self.s_next[idx], self.terminal[idx])


def double_dqn_targets(batch: Batch, current: QNetwork, target: QNetwork, gamma: float):
    """Per-head targets: select with the current net, evaluate with the target net."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    rows = np.arange(len(batch))
    cy, cp = current.forward(batch.s_next)
    ty, tp = target.forward(batch.s_next)
    keep = gamma * (~np.asarray(batch.terminal, dtype=bool))
    t_yaw = batch.r + keep * ty[rows, np.argmax(cy, axis=1)]
    t_pitch = batch.r + keep * tp[rows, np.argmax(cp, axis=1)]
    return t_yaw, t_pitch


class SGD:
    def __init__(self, eta: float):
        self.eta = eta

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        theta -= self.eta * grad


class Adam:
    def __init__(self, eta: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.eta, self.beta1, self.beta2, self.eps = eta, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        lr = self.eta * np.sqrt(1 - self.beta2 ** self.t) / (1 - self.beta1 ** self.t)
        theta -= lr * self.m / (np.sqrt(self.v) + self.eps)


def make_optimizer(name: str, eta: float):
    if name == "sgd":
        return SGD(eta)
    if name == "adam":
        return Adam(eta)
    raise ValueError(f"unknown optimizer {name!r}")


def gradient_step(net: QNetwork, batch: Batch, targets, eta: float | None = None, optimizer=None) -> float:
    """One descent step on the TD regression loss; updates ``net`` in place.

    Uses plain gradient descent at ``eta`` unless an optimizer is given.
    Returns the pre-step loss.
    """
    t_yaw, t_pitch = targets
    loss, grad = net.loss_and_grad(batch.s, batch.a_yaw, batch.a_pitch, t_yaw, t_pitch)
    if optimizer is None:
        net.theta -= eta * grad
    else:
        optimizer.step(net.theta, grad)
    return loss


def soft_update(target: QNetwork, current: QNetwork, tau: float) -> QNetwork:
    if not target.same_architecture(current):
        raise NetworkShapeError("soft update between different architectures")
    target.theta *= 1.0 - tau
    target.theta += tau * current.theta
    return target


class DoubleDQN:
    """Current/target network pair with its optimizer."""

    def __init__(self, net: QNetwork, gamma: float, tau: float, eta: float, optimizer: str = "sgd",
                 reward_scale: float = 1.0):
        self.current = net
        self.target = net.copy()
        self.gamma = gamma
        self.tau = tau
        self.reward_scale = reward_scale
        self.optimizer = make_optimizer(optimizer, eta)
        self.updates = 0

    def train_step(self, batch: Batch) -> float:
        if self.reward_scale != 1.0:
            batch = Batch(batch.s, batch.a_yaw, batch.a_pitch, batch.r * self.reward_scale,
                          batch.s_next, batch.terminal)
        targets = double_dqn_targets(batch, self.current, self.target, self.gamma)
        loss = gradient_step(self.current, batch, targets, optimizer=self.optimizer)
        soft_update(self.target, self.current, self.tau)
        self.updates += 1
        return loss


MAGIC = b"SWQN"
VERSION = 1


def save_checkpoint(path: str | Path, net: QNetwork, history: int) -> None:
    sizes = (net.n_in,) + net.hidden
    header = struct.pack("<4sIIIII", MAGIC, VERSION, history, net.n_yaw, net.n_pitch, len(sizes))
    header += struct.pack(f"<{len(sizes)}I", *sizes)
    header += struct.pack("<Q", net.size)
    Path(path).write_bytes(header + net.theta.astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[QNetwork, int]:
    data = Path(path).read_bytes()
    magic, version, history, n_yaw, n_pitch, n_sizes = struct.unpack_from("<4sIIIII", data, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a Q-network checkpoint")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = struct.calcsize("<4sIIIII")
    sizes = struct.unpack_from(f"<{n_sizes}I", data, off)
    off += 4 * n_sizes
    (n_params,) = struct.unpack_from("<Q", data, off)
    off += 8
    theta = np.frombuffer(data, dtype="<f8", count=n_params, offset=off).astype(np.float64)
    net = QNetwork(sizes[0], sizes[1:], n_yaw, n_pitch, theta=theta)
    return net, history
