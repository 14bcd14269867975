"""First-order optimizers with full moment introspection.

All three update rules are pure functions over (state, params, grads): they
return fresh arrays and a fresh state, never mutating their inputs, so a
failed update can simply be discarded. Moments are kept as flat vectors
aligned with a FlatParams layout; `moment_norms` exposes the global L2 norms
that the divergence diagnostics track over training.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DivergenceError
from .params import FlatParams

KINDS = ("adam", "rmsprop", "sgd_momentum")


@dataclass(frozen=True)
class Hyper:
    lr: float = 4e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.9
    weight_decay: float = 0.0  # decoupled decay; 0 disables
    bias_correction: bool = True


@dataclass(frozen=True)
class OptimizerState:
    kind: str
    hyper: Hyper
    step_count: int = 0
    m: np.ndarray | None = None  # first moment (absent for rmsprop)
    v: np.ndarray | None = None  # second moment (absent for sgd_momentum)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")


def init_state(kind: str, n_params: int, hyper: Hyper) -> OptimizerState:
    m = np.zeros(n_params) if kind in ("adam", "sgd_momentum") else None
    v = np.zeros(n_params) if kind in ("adam", "rmsprop") else None
    return OptimizerState(kind=kind, hyper=hyper, step_count=0, m=m, v=v)


def _check_finite(grads: np.ndarray, params: FlatParams | None):
    if np.isfinite(grads).all():
        return
    if params is not None:
        bad = int(np.flatnonzero(~np.isfinite(grads))[0])
        raise DivergenceError(params.locate(bad), "gradient")
    raise DivergenceError("gradient")


def adam_step(state: OptimizerState, grads: np.ndarray, params: np.ndarray,
              owner: FlatParams | None = None):
    """One Adam update; returns (new_params, new_state)."""
    if state.kind != "adam":
        raise ConfigError(f"adam_step called on {state.kind} state")
    _check_finite(grads, owner)
    h = state.hyper
    if h.weight_decay > 0.0:
        params = params - h.lr * h.weight_decay * params
    t = state.step_count + 1
    m = h.beta1 * state.m + (1.0 - h.beta1) * grads
    v = h.beta2 * state.v + (1.0 - h.beta2) * grads * grads
    if h.bias_correction:
        m_hat = m / (1.0 - h.beta1**t)
        v_hat = v / (1.0 - h.beta2**t)
    else:
        m_hat, v_hat = m, v
    new_params = params - h.lr * m_hat / (np.sqrt(v_hat) + h.eps)
    return new_params, replace(state, step_count=t, m=m, v=v)


def rmsprop_step(state: OptimizerState, grads: np.ndarray, params: np.ndarray,
                 owner: FlatParams | None = None):
    """RMSProp: the Adam second-moment path alone, no bias correction."""
    if state.kind != "rmsprop":
        raise ConfigError(f"rmsprop_step called on {state.kind} state")
    _check_finite(grads, owner)
    h = state.hyper
    if h.weight_decay > 0.0:
        params = params - h.lr * h.weight_decay * params
    v = h.beta2 * state.v + (1.0 - h.beta2) * grads * grads
    new_params = params - h.lr * grads / (np.sqrt(v) + h.eps)
    return new_params, replace(state, step_count=state.step_count + 1, v=v)


def sgd_momentum_step(state: OptimizerState, grads: np.ndarray, params: np.ndarray,
                      owner: FlatParams | None = None):
    """Heavy-ball SGD: m <- mu*m + g; p <- p - lr*m."""
    if state.kind != "sgd_momentum":
        raise ConfigError(f"sgd_momentum_step called on {state.kind} state")
    _check_finite(grads, owner)
    h = state.hyper
    if h.weight_decay > 0.0:
        params = params - h.lr * h.weight_decay * params
    m = h.momentum * state.m + grads
    new_params = params - h.lr * m
    return new_params, replace(state, step_count=state.step_count + 1, m=m)


_STEPS = {
    "adam": adam_step,
    "rmsprop": rmsprop_step,
    "sgd_momentum": sgd_momentum_step,
}


def apply_step(state: OptimizerState, grads: np.ndarray, params: np.ndarray,
               owner: FlatParams | None = None):
    return _STEPS[state.kind](state, grads, params, owner)


def moment_norms(state: OptimizerState) -> tuple[float, float]:
    """Global L2 norm of the first and second moment accumulators (0 if absent)."""
    m_norm = float(np.linalg.norm(state.m)) if state.m is not None else 0.0
    v_norm = float(np.linalg.norm(state.v)) if state.v is not None else 0.0
    return m_norm, v_norm
