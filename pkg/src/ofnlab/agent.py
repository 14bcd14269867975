"""Soft actor-critic: losses, entropy temperature, update loop, resets.

One ``update_step`` performs a full cycle: sample batch -> critic target ->
critic gradient step -> actor gradient step (plus the optional
behavioral-cloning term) -> temperature step -> Polyak update of every
target critic. The step is transactional: if any sub-step produces a
non-finite loss or gradient, all parameter changes from this step are rolled
back and the failure is reported in the returned delta, so divergence
studies can keep running.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import optim
from .errors import ConfigError, DivergenceError
from .networks import ActorNet, CriticNet, polyak_update
from .params import FlatParams
from .replay import Batch, ReplayBuffer

LOG_ALPHA = "temperature.log_alpha"


@dataclass
class AgentConfig:
    """Every agent hyperparameter plus protocol switches.

    Defaults follow the shared setup (Adam, two 256-wide critic layers,
    gamma 0.99, tau 0.005, batch 256, actor/critic lr 4e-3, temperature lr
    3e-4) with the high-update-ratio entropy settings; priming-style runs
    override initial_temperature / target_entropy / log_std_bounds.
    """

    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256
    actor_lr: float = 4e-3
    critic_lr: float = 4e-3
    temp_lr: float = 3e-4
    n_critics: int = 2
    hidden: int = 256
    layers: int = 2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    initial_temperature: float = 1.0
    target_entropy: float | None = None  # None -> -action_dim / 2
    log_std_bounds: tuple[float, float] = (-10.0, 2.0)
    utd: int = 1
    actor_utd_scale: int = 1
    ofn: bool = False
    activation: str = "relu"
    dropout_rate: float = 0.0
    weight_decay: float = 0.0
    decoupled_weight_decay: bool = False
    bc_coefficient: float = 0.0
    optimizer: str = "adam"
    momentum: float = 0.9
    reset_scope: str = "none"
    reset_interval_steps: int = 20000
    init_random_steps: int = 500
    divergence_kappa: float = 2.0
    reward_max: float = 1.0

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")
        if self.n_critics not in (1, 2):
            raise ConfigError(f"n_critics must be 1 or 2, got {self.n_critics}")
        if self.batch_size <= 0 or self.hidden <= 0 or self.layers <= 0:
            raise ConfigError("batch_size, hidden, and layers must be positive")
        if self.utd < 0 or self.actor_utd_scale < 1:
            raise ConfigError("utd must be >= 0 and actor_utd_scale >= 1")
        if self.activation not in ("relu", "elu"):
            raise ConfigError(f"activation must be relu or elu, got {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.optimizer not in optim.KINDS:
            raise ConfigError(f"optimizer must be one of {optim.KINDS}")
        if self.reset_scope not in ("none", "actor", "all"):
            raise ConfigError(f"reset_scope must be none/actor/all, got {self.reset_scope!r}")
        if self.weight_decay < 0.0 or self.bc_coefficient < 0.0:
            raise ConfigError("weight_decay and bc_coefficient must be >= 0")
        if self.initial_temperature <= 0.0:
            raise ConfigError("initial_temperature must be positive")
        lo, hi = self.log_std_bounds
        if not lo < hi:
            raise ConfigError(f"log_std_bounds must be increasing, got {self.log_std_bounds}")


@dataclass
class MetricsDelta:
    """What one update step reports back to the training loop."""

    mean_q: float | None = None
    critic_loss: float | None = None
    actor_loss: float | None = None
    alpha: float = 0.0
    diverged: bool = False
    error: str | None = None


# ---------------------------------------------------------------------------
# losses


def compute_critic_target(batch: Batch, targets, actor, alpha, gamma, rng):
    """Bootstrapped TD target y = r + (1 - done) * gamma * (min_j Qbar_j - alpha * logpi).

    Computed off-tape: y is a constant, no gradient flows through it.
    """
    a_next, logp_next = actor.sample(batch.s_next, rng, tape=None,
                                     trainable=False, mode="stochastic")
    q_min = None
    for tgt in targets:
        q, _ = tgt.forward(batch.s_next, a_next, tape=None, trainable=False)
        q_min = q.data if q_min is None else np.minimum(q_min, q.data)
    return batch.r + (1.0 - batch.done) * gamma * (q_min - alpha * logp_next.data)


def critic_loss(tape: ad.Tape, batch: Batch, critics, y, weight_decay=0.0, rng=None):
    """Mean squared TD error over batch and critics, plus optional L2 penalty.

    Returns (loss tensor, mean Q of the first critic on the batch).
    """
    y_t = ad.Tensor(y)
    total = None
    mean_q = None
    for net in critics:
        q, _ = net.forward(batch.s, batch.a, tape=tape, trainable=True,
                           training=True, rng=rng)
        if mean_q is None:
            mean_q = float(q.data.mean())
        term = ad.mean_all(ad.square(ad.sub(q, y_t)))
        total = term if total is None else ad.add(total, term)
    loss = ad.mul(total, ad.Tensor(1.0 / len(critics)))
    if weight_decay > 0.0:
        penalty = None
        for net in critics:
            for name in net.weight_leaf_names():
                w = tape.leaf(name, net.params.view(name))
                term = ad.sum_all(ad.square(w))
                penalty = term if penalty is None else ad.add(penalty, term)
        loss = ad.add(loss, ad.mul(penalty, ad.Tensor(0.5 * weight_decay)))
    return loss, mean_q


def actor_loss(tape: ad.Tape, batch: Batch, critics, actor, alpha, rng,
               bc_coefficient=0.0):
    """Mean of alpha * logpi(a|s) - min_j Q_j(s, a) with reparameterized a.

    Critic parameters enter as constants so the gradient only reaches the
    actor. With bc_coefficient > 0 the mean L2 distance between buffer
    actions and the sampled actions is added, scaled by the coefficient.
    Returns (loss tensor, log-prob tensor).
    """
    a_new, logp = actor.sample(batch.s, rng, tape=tape, trainable=True,
                               mode="stochastic")
    q_min = None
    for net in critics:
        q, _ = net.forward(batch.s, a_new, tape=tape, trainable=False,
                           training=True, rng=rng)
        q_min = q if q_min is None else ad.minimum(q_min, q)
    loss = ad.mean_all(ad.sub(ad.mul(logp, ad.Tensor(alpha)), q_min))
    if bc_coefficient > 0.0:
        gap = ad.sub(ad.Tensor(batch.a), a_new)
        dist = ad.mean_all(ad.sqrt(ad.sum_rows(ad.square(gap))))
        loss = ad.add(loss, ad.mul(dist, ad.Tensor(bc_coefficient)))
    return loss, logp


def bc_loss(tape: ad.Tape, batch: Batch, actor, rng):
    """Mean L2 distance between buffer actions and freshly sampled policy actions."""
    a_new, _ = actor.sample(batch.s, rng, tape=tape, trainable=True, mode="stochastic")
    gap = ad.sub(ad.Tensor(batch.a), a_new)
    return ad.mean_all(ad.sqrt(ad.sum_rows(ad.square(gap))))


def temperature_loss(tape: ad.Tape, log_probs: np.ndarray, temperature: FlatParams,
                     target_entropy: float):
    """Mean of -log_alpha * (logpi + target_entropy); log-probs are detached."""
    log_alpha = tape.leaf(LOG_ALPHA, temperature.view(LOG_ALPHA))
    err = ad.Tensor(log_probs + target_entropy)
    return ad.mean_all(ad.mul(ad.neg(log_alpha), err))


# ---------------------------------------------------------------------------
# the agent


class SacAgent:
    """Networks, optimizer states, and the transactional update step."""

    def __init__(self, config: AgentConfig, state_dim: int, action_dim: int, seed: int):
        config.validate()
        self.config = config
        self.state_dim = state_dim
        self.action_dim = action_dim
        root = np.random.SeedSequence([int(seed), 0x5AC])
        init_ss, sample_ss, reset_ss = root.spawn(3)
        init_rng = np.random.default_rng(init_ss)
        self._sample_rng = np.random.default_rng(sample_ss)
        self._reset_rng = np.random.default_rng(reset_ss)

        self.critics = [
            CriticNet(f"critic{i}", state_dim, action_dim, config.hidden,
                      config.layers, config.activation, config.ofn,
                      config.dropout_rate, init_rng)
            for i in range(config.n_critics)
        ]
        self.targets = [net.clone(f"target{i}") for i, net in enumerate(self.critics)]
        self.actor = ActorNet("actor", state_dim, action_dim, config.hidden,
                              config.layers, config.activation,
                              config.log_std_bounds, init_rng)
        self.temperature = FlatParams(
            [(LOG_ALPHA, np.asarray(math.log(config.initial_temperature)))])
        self.target_entropy = (config.target_entropy if config.target_entropy is not None
                               else -action_dim / 2.0)

        decay = config.weight_decay if config.decoupled_weight_decay else 0.0
        self._critic_hyper = optim.Hyper(
            lr=config.critic_lr, beta1=config.adam_beta1, beta2=config.adam_beta2,
            eps=config.adam_eps, momentum=config.momentum, weight_decay=decay)
        self._actor_hyper = optim.Hyper(
            lr=config.actor_lr, beta1=config.adam_beta1, beta2=config.adam_beta2,
            eps=config.adam_eps, momentum=config.momentum)
        self._temp_hyper = optim.Hyper(
            lr=config.temp_lr, beta1=config.adam_beta1, beta2=config.adam_beta2,
            eps=config.adam_eps, momentum=config.momentum)
        self.critic_opts = [optim.init_state(config.optimizer, net.params.size,
                                             self._critic_hyper)
                            for net in self.critics]
        self.actor_opt = optim.init_state(config.optimizer, self.actor.params.size,
                                          self._actor_hyper)
        self.temp_opt = optim.init_state(config.optimizer, 1, self._temp_hyper)
        self.total_updates = 0

    # -- inference ----------------------------------------------------------

    @property
    def alpha(self) -> float:
        return float(np.exp(self.temperature.view(LOG_ALPHA)))

    def act(self, obs: np.ndarray, mode: str = "stochastic") -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64).reshape(1, -1)
        action, _ = self.actor.sample(obs, self._sample_rng, tape=None,
                                      trainable=False, mode=mode)
        return np.asarray(action.data[0])

    def mean_q(self, s: np.ndarray, a: np.ndarray, index: int = 0) -> float:
        q, _ = self.critics[index].forward(s, a, tape=None, trainable=False)
        return float(q.data.mean())

    def features(self, s: np.ndarray, a: np.ndarray, index: int = 0) -> np.ndarray:
        _, feat = self.critics[index].forward(s, a, tape=None, trainable=False)
        return feat.data

    def critic_moment_norms(self) -> tuple[float, float]:
        norms = [optim.moment_norms(s) for s in self.critic_opts]
        m = math.sqrt(sum(n[0] ** 2 for n in norms))
        v = math.sqrt(sum(n[1] ** 2 for n in norms))
        return m, v

    def components(self) -> list[FlatParams]:
        nets = [net.params for net in self.critics + self.targets]
        return nets + [self.actor.params, self.temperature]

    # -- learning -----------------------------------------------------------

    def update_step(self, buffer: ReplayBuffer, batch: Batch | None = None,
                    bc_active: bool = False) -> MetricsDelta:
        cfg = self.config
        if batch is None:
            batch = buffer.sample(cfg.batch_size)
        alpha = self.alpha
        delta = MetricsDelta(alpha=alpha)
        rng = self._sample_rng

        y = compute_critic_target(batch, self.targets, self.actor, alpha,
                                  cfg.gamma, rng)
        actor_due = (self.total_updates % cfg.actor_utd_scale) == 0
        self.total_updates += 1

        all_params = [net.params for net in self.critics] + [self.actor.params,
                                                             self.temperature]
        saved_vectors = [p.vector for p in all_params]
        try:
            if not np.isfinite(y).all():
                raise DivergenceError("critic_target")

            tape = ad.Tape()
            coupled_decay = 0.0 if cfg.decoupled_weight_decay else cfg.weight_decay
            c_loss, mean_q = critic_loss(tape, batch, self.critics, y,
                                         coupled_decay, rng)
            delta.mean_q = mean_q
            if not np.isfinite(c_loss.data):
                raise DivergenceError("critic_loss")
            delta.critic_loss = float(c_loss.data)
            grads = tape.gradients(c_loss)
            new_critic_opts = []
            for net, state in zip(self.critics, self.critic_opts):
                gvec = net.params.flatten_grads(grads)
                vec, state = optim.apply_step(state, gvec, net.params.vector,
                                              net.params)
                net.params.set_vector(vec)
                new_critic_opts.append(state)

            new_actor_opt = self.actor_opt
            new_temp_opt = self.temp_opt
            if actor_due:
                tape = ad.Tape()
                bc = cfg.bc_coefficient if bc_active else 0.0
                a_loss, logp = actor_loss(tape, batch, self.critics, self.actor,
                                          alpha, rng, bc)
                if not np.isfinite(a_loss.data):
                    raise DivergenceError("actor_loss")
                delta.actor_loss = float(a_loss.data)
                grads = tape.gradients(a_loss)
                gvec = self.actor.params.flatten_grads(grads)
                vec, new_actor_opt = optim.apply_step(self.actor_opt, gvec,
                                                      self.actor.params.vector,
                                                      self.actor.params)
                self.actor.params.set_vector(vec)

                tape = ad.Tape()
                t_loss = temperature_loss(tape, logp.data, self.temperature,
                                          self.target_entropy)
                if not np.isfinite(t_loss.data):
                    raise DivergenceError("temperature_loss")
                grads = tape.gradients(t_loss)
                gvec = self.temperature.flatten_grads(grads)
                vec, new_temp_opt = optim.apply_step(self.temp_opt, gvec,
                                                     self.temperature.vector,
                                                     self.temperature)
                self.temperature.set_vector(vec)
        except DivergenceError as err:
            for p, vec in zip(all_params, saved_vectors):
                p.set_vector(vec)
            delta.diverged = True
            delta.error = str(err)
            return delta

        self.critic_opts = new_critic_opts
        self.actor_opt = new_actor_opt
        self.temp_opt = new_temp_opt
        for tgt, net in zip(self.targets, self.critics):
            polyak_update(tgt, net, cfg.tau)
        return delta

    # -- resets --------------------------------------------------------------

    def reset(self, scope: str) -> None:
        """Reinitialize networks and zero optimizer state; the buffer survives.

        scope "actor" touches only the actor; "all" also reinitializes the
        critics (targets re-copied from the fresh critics) and the entropy
        temperature.
        """
        if scope == "none":
            return
        if scope not in ("actor", "all"):
            raise ConfigError(f"unknown reset scope {scope!r}")
        rng = self._reset_rng
        self.actor.reinitialize(rng)
        self.actor_opt = optim.init_state(self.config.optimizer,
                                          self.actor.params.size, self._actor_hyper)
        if scope == "all":
            for i, net in enumerate(self.critics):
                net.reinitialize(rng)
                self.targets[i].sync_from(net)
            self.critic_opts = [optim.init_state(self.config.optimizer,
                                                 net.params.size, self._critic_hyper)
                                for net in self.critics]
            self.temperature.load_dict(
                {LOG_ALPHA: np.asarray(math.log(self.config.initial_temperature))})
            self.temp_opt = optim.init_state(self.config.optimizer, 1,
                                             self._temp_hyper)
