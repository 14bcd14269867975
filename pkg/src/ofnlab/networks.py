"""Actor and critic networks, target maintenance, resets, and checkpoints.

The critic is an MLP encoder over the concatenated state-action batch with a
scalar linear head on top; with feature normalization enabled the encoder
output is projected onto the unit sphere before the head, which bounds
|Q(s,a)| by the head weight norm. The actor is a squashed-Gaussian policy
with clamped log-std heads.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ContractViolation
from .params import FlatParams

CHECKPOINT_VERSION = 1

_ACTIVATIONS = {"relu": ad.relu, "elu": ad.elu}


def activation_fn(kind: str):
    try:
        return _ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(f"unsupported activation {kind!r}") from None


def _linear_entries(rng: np.random.Generator, prefix: str, fan_in: int, fan_out: int):
    """Uniform fan-in initialization, U[-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / math.sqrt(fan_in)
    return [
        (f"{prefix}.weight", rng.uniform(-bound, bound, size=(fan_in, fan_out))),
        (f"{prefix}.bias", rng.uniform(-bound, bound, size=(fan_out,))),
    ]


def _param_tensor(tape, params: FlatParams, name: str, trainable: bool) -> ad.Tensor:
    view = params.view(name)
    if tape is not None and trainable:
        return tape.leaf(name, view)
    return ad.Tensor(view)


def _as_batch(x, dim: int, what: str) -> ad.Tensor:
    t = x if isinstance(x, ad.Tensor) else ad.Tensor(x)
    if t.data.ndim != 2 or t.data.shape[1] != dim:
        raise ContractViolation(
            f"{what}: expected [B x {dim}] batch, got shape {t.data.shape}"
        )
    return t


class CriticNet:
    """Q(s, a) = head(features([s || a])), features optionally on the unit sphere."""

    def __init__(self, name, state_dim, action_dim, hidden=256, n_layers=2,
                 activation="relu", ofn=False, dropout_rate=0.0,
                 rng: np.random.Generator | None = None):
        self.name = name
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.hidden = hidden
        self.n_layers = n_layers
        self.activation = activation
        self.ofn = ofn
        self.dropout_rate = dropout_rate
        self._act = activation_fn(activation)
        self.params = FlatParams(self._fresh_entries(rng) if rng is not None else
                                 self._zero_entries())

    def _layer_dims(self):
        dims = []
        fan_in = self.state_dim + self.action_dim
        for _ in range(self.n_layers):
            dims.append((fan_in, self.hidden))
            fan_in = self.hidden
        dims.append((fan_in, 1))
        return dims

    def _layer_names(self):
        return [f"layer{i + 1}" for i in range(self.n_layers)] + ["head"]

    def _fresh_entries(self, rng):
        entries = []
        for layer, (fan_in, fan_out) in zip(self._layer_names(), self._layer_dims()):
            entries.extend(_linear_entries(rng, f"{self.name}.{layer}", fan_in, fan_out))
        return entries

    def _zero_entries(self):
        entries = []
        for layer, (fan_in, fan_out) in zip(self._layer_names(), self._layer_dims()):
            entries.append((f"{self.name}.{layer}.weight", np.zeros((fan_in, fan_out))))
            entries.append((f"{self.name}.{layer}.bias", np.zeros(fan_out)))
        return entries

    def reinitialize(self, rng: np.random.Generator) -> None:
        self.params.load_dict(dict(self._fresh_entries(rng)))

    def clone(self, new_name: str) -> "CriticNet":
        twin = CriticNet(new_name, self.state_dim, self.action_dim, self.hidden,
                         self.n_layers, self.activation, self.ofn, self.dropout_rate)
        twin.params.set_vector(self.params.vector.copy())
        return twin

    def sync_from(self, other: "CriticNet") -> None:
        self.params.set_vector(other.params.vector.copy())

    def forward(self, s, a, tape=None, trainable=True, training=False, rng=None):
        """Return (q [B x 1], features [B x hidden]) as tensors.

        With `tape` set and `trainable`, parameters are registered as leaves;
        otherwise they enter as constants (used for target nets and for the
        actor update, where the critic is held fixed).
        """
        s = _as_batch(s, self.state_dim, f"{self.name} state")
        a = _as_batch(a, self.action_dim, f"{self.name} action")
        h = ad.concat_cols(s, a)
        names = self._layer_names()
        for layer in names[:-1]:
            w = _param_tensor(tape, self.params, f"{self.name}.{layer}.weight", trainable)
            b = _param_tensor(tape, self.params, f"{self.name}.{layer}.bias", trainable)
            h = self._act(ad.linear(h, w, b))
            if self.dropout_rate > 0.0:
                if training and rng is None:
                    raise ContractViolation("dropout in training mode needs an rng")
                h = ad.dropout(h, self.dropout_rate, rng, training)
        feat = ad.unit_ball_project(h) if self.ofn else h
        w = _param_tensor(tape, self.params, f"{self.name}.head.weight", trainable)
        b = _param_tensor(tape, self.params, f"{self.name}.head.bias", trainable)
        return ad.linear(feat, w, b), feat

    def weight_leaf_names(self):
        """Weight-matrix parameter names (biases excluded), encoder first."""
        return [f"{self.name}.{layer}.weight" for layer in self._layer_names()]


class ActorNet:
    """Tanh-squashed Gaussian policy with clamped log-std head."""

    def __init__(self, name, state_dim, action_dim, hidden=256, n_layers=2,
                 activation="relu", log_std_bounds=(-10.0, 2.0),
                 rng: np.random.Generator | None = None):
        lo, hi = log_std_bounds
        if not lo < hi:
            raise ConfigError(f"log_std_bounds must be increasing, got {log_std_bounds}")
        self.name = name
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.hidden = hidden
        self.n_layers = n_layers
        self.activation = activation
        self.log_std_bounds = (float(lo), float(hi))
        self._act = activation_fn(activation)
        self.params = FlatParams(self._fresh_entries(rng) if rng is not None else
                                 self._zero_entries())

    def _blocks(self):
        blocks = []
        fan_in = self.state_dim
        for i in range(self.n_layers):
            blocks.append((f"trunk{i + 1}", fan_in, self.hidden))
            fan_in = self.hidden
        blocks.append(("mean", fan_in, self.action_dim))
        blocks.append(("log_std", fan_in, self.action_dim))
        return blocks

    def _fresh_entries(self, rng):
        entries = []
        for block, fan_in, fan_out in self._blocks():
            entries.extend(_linear_entries(rng, f"{self.name}.{block}", fan_in, fan_out))
        return entries

    def _zero_entries(self):
        entries = []
        for block, fan_in, fan_out in self._blocks():
            entries.append((f"{self.name}.{block}.weight", np.zeros((fan_in, fan_out))))
            entries.append((f"{self.name}.{block}.bias", np.zeros(fan_out)))
        return entries

    def reinitialize(self, rng: np.random.Generator) -> None:
        self.params.load_dict(dict(self._fresh_entries(rng)))

    def _heads(self, s, tape, trainable):
        s = _as_batch(s, self.state_dim, f"{self.name} state")
        h = s
        for i in range(self.n_layers):
            w = _param_tensor(tape, self.params, f"{self.name}.trunk{i + 1}.weight", trainable)
            b = _param_tensor(tape, self.params, f"{self.name}.trunk{i + 1}.bias", trainable)
            h = self._act(ad.linear(h, w, b))
        wm = _param_tensor(tape, self.params, f"{self.name}.mean.weight", trainable)
        bm = _param_tensor(tape, self.params, f"{self.name}.mean.bias", trainable)
        ws = _param_tensor(tape, self.params, f"{self.name}.log_std.weight", trainable)
        bs = _param_tensor(tape, self.params, f"{self.name}.log_std.bias", trainable)
        mu = ad.linear(h, wm, bm)
        log_std = ad.clamp(ad.linear(h, ws, bs), *self.log_std_bounds)
        return mu, log_std

    def sample(self, s, rng=None, tape=None, trainable=True, mode="stochastic"):
        """Draw actions; returns (action [B x d], log_prob [B x 1] or None).

        Stochastic mode reparameterizes u = mu + sigma * zeta and squashes
        a = tanh(u); the log-probability subtracts the tanh change-of-variables
        term sum_i log(1 - tanh(u_i)^2) from the Gaussian log-density.
        """
        if mode not in ("stochastic", "deterministic"):
            raise ContractViolation(f"unknown sampling mode {mode!r}")
        mu, log_std = self._heads(s, tape, trainable)
        if mode == "deterministic":
            return ad.tanh(mu), None
        if rng is None:
            raise ContractViolation("stochastic sampling needs an rng")
        sigma = ad.exp(log_std)
        zeta = ad.Tensor(rng.standard_normal(mu.data.shape))
        u = ad.add(mu, ad.mul(sigma, zeta))
        action = ad.tanh(u)
        z = ad.div(ad.sub(u, mu), sigma)
        gauss = ad.sub(ad.mul(ad.square(z), ad.Tensor(-0.5)),
                       ad.add(log_std, ad.Tensor(0.5 * math.log(2.0 * math.pi))))
        log_prob = ad.sub(ad.sum_rows(gauss), ad.sum_rows(ad.log1m_tanh_sq(u)))
        return action, log_prob


def polyak_update(target: CriticNet, online: CriticNet, tau: float) -> None:
    """In-place target <- (1 - tau) * target + tau * online, parameter-wise exact."""
    if not 0.0 < tau <= 1.0:
        raise ContractViolation(f"tau must be in (0, 1], got {tau}")
    tv, ov = target.params.vector, online.params.vector
    if tv.shape != ov.shape:
        raise ContractViolation("polyak_update: parameter shapes do not match")
    target.params.set_vector((1.0 - tau) * tv + tau * ov)


def layer_weight_norms(net: CriticNet) -> list[float]:
    """Frobenius norm of each weight matrix, ordered [layer1, ..., head]."""
    return [float(np.linalg.norm(net.params.view(name)))
            for name in net.weight_leaf_names()]


# ---------------------------------------------------------------------------
# checkpoints: a flat, versioned JSON map from parameter path to values


def checkpoint_dump(components: list[FlatParams]) -> str:
    params = {}
    for comp in components:
        for name in comp.names:
            view = comp.view(name)
            params[name] = {"shape": list(view.shape), "data": view.ravel().tolist()}
    return json.dumps({"format_version": CHECKPOINT_VERSION, "params": params})


def checkpoint_save(path, components: list[FlatParams]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(checkpoint_dump(components))


def checkpoint_load(path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise ContractViolation(f"unsupported checkpoint version {blob.get('format_version')}")
    out = {}
    for name, entry in blob["params"].items():
        out[name] = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
    return out
