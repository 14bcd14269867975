"""Built-in deterministic continuous-control tasks with rewards in [0, 1].

Three desk-scale MDPs stand in for a physics benchmark suite:

* ``pendulum``: torque-limited swing-up of a rod pivoting at one end.
  Observation (cos th, sin th, th_dot) with th = 0 upright; dense reward
  (1 + cos th) / 2.
* ``pendulum_sparse``: same dynamics, reward 1 only within 0.15 rad of
  upright.
* ``reacher2d``: a 2-D point mass steering to a goal through a high-drag
  "puddle" region around the origin; dense reward exp(-4 * |p - goal|^2).

Dynamics are integrated with semi-implicit Euler substeps; (state, action)
-> next state is a pure function, all randomness lives in reset().
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    episode_length: int
    reward_range: tuple[float, float] = (0.0, 1.0)
    physics: dict = field(default_factory=dict)


class Pendulum:
    """Swing-up of a uniform rod; gravity must be pumped against.

    Physics (rod pivoting at one end): th_ddot = (3g / 2l) sin th
    + (3 / m l^2) * torque, th measured from upright so th = pi is the
    stable hanging equilibrium. Angular velocity is clipped to +-max_speed.
    """

    GRAVITY = 10.0
    MASS = 1.0
    LENGTH = 1.0
    DT = 0.05
    SUBSTEPS = 8
    MAX_TORQUE = 2.0
    MAX_SPEED = 8.0

    def __init__(self, sparse: bool = False, episode_length: int = 200):
        self.sparse = sparse
        self.spec = EnvSpec(
            name="pendulum_sparse" if sparse else "pendulum",
            state_dim=3,
            action_dim=1,
            episode_length=episode_length,
            physics={
                "gravity": self.GRAVITY, "mass": self.MASS, "length": self.LENGTH,
                "dt": self.DT, "substeps": self.SUBSTEPS,
                "max_torque": self.MAX_TORQUE, "max_speed": self.MAX_SPEED,
            },
        )
        self.theta = 0.0
        self.theta_dot = 0.0
        self._t = 0

    def _obs(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Angle uniform in [-pi, pi], velocity uniform in [-1, 1]."""
        self.theta = rng.uniform(-math.pi, math.pi)
        self.theta_dot = rng.uniform(-1.0, 1.0)
        self._t = 0
        return self._obs()

    def _reward(self) -> float:
        if self.sparse:
            wrapped = math.atan2(math.sin(self.theta), math.cos(self.theta))
            return 1.0 if abs(wrapped) < 0.15 else 0.0
        return (1.0 + math.cos(self.theta)) / 2.0

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (1,):
            raise ContractViolation(f"pendulum expects 1-D action, got {action.shape}")
        if not np.isfinite(action).all():
            raise ContractViolation("non-finite action")
        torque = float(np.clip(action[0], -1.0, 1.0)) * self.MAX_TORQUE
        g, m, length = self.GRAVITY, self.MASS, self.LENGTH
        h = self.DT / self.SUBSTEPS
        for _ in range(self.SUBSTEPS):
            acc = (3.0 * g / (2.0 * length)) * math.sin(self.theta) \
                + (3.0 / (m * length**2)) * torque
            self.theta_dot = float(np.clip(self.theta_dot + h * acc,
                                           -self.MAX_SPEED, self.MAX_SPEED))
            self.theta += h * self.theta_dot
        self._t += 1
        return self._obs(), self._reward(), self._t >= self.spec.episode_length

    def mechanical_energy(self) -> float:
        """Kinetic + potential energy of the rod (zero-torque sanity checks)."""
        inertia = self.MASS * self.LENGTH**2 / 3.0
        kinetic = 0.5 * inertia * self.theta_dot**2
        potential = self.MASS * self.GRAVITY * (self.LENGTH / 2.0) * math.cos(self.theta)
        return kinetic + potential


class Reacher2D:
    """Point mass on [-1, 1]^2 driving toward a fixed goal.

    Acceleration control with linear drag; drag is five times higher inside
    the circular puddle around the origin. Position clips at the walls with
    the offending velocity component zeroed.
    """

    DT = 0.1
    SUBSTEPS = 2
    ACCEL = 1.0
    DRAG = 0.5
    PUDDLE_DRAG = 2.5
    PUDDLE_RADIUS = 0.35
    MAX_SPEED = 2.0
    GOAL = (0.6, 0.6)
    START = (-0.6, -0.6)

    def __init__(self, episode_length: int = 200):
        self.spec = EnvSpec(
            name="reacher2d",
            state_dim=4,
            action_dim=2,
            episode_length=episode_length,
            physics={
                "dt": self.DT, "substeps": self.SUBSTEPS, "accel": self.ACCEL,
                "drag": self.DRAG, "puddle_drag": self.PUDDLE_DRAG,
                "puddle_radius": self.PUDDLE_RADIUS, "goal": list(self.GOAL),
            },
        )
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self._t = 0

    def _obs(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Start near the lower-left corner with zero velocity."""
        self.pos = np.asarray(self.START) + rng.uniform(-0.1, 0.1, size=2)
        self.vel = np.zeros(2)
        self._t = 0
        return self._obs()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (2,):
            raise ContractViolation(f"reacher2d expects 2-D action, got {action.shape}")
        if not np.isfinite(action).all():
            raise ContractViolation("non-finite action")
        a = np.clip(action, -1.0, 1.0) * self.ACCEL
        h = self.DT / self.SUBSTEPS
        for _ in range(self.SUBSTEPS):
            in_puddle = float(np.dot(self.pos, self.pos)) < self.PUDDLE_RADIUS**2
            drag = self.PUDDLE_DRAG if in_puddle else self.DRAG
            self.vel = self.vel + h * (a - drag * self.vel)
            speed = float(np.linalg.norm(self.vel))
            if speed > self.MAX_SPEED:
                self.vel *= self.MAX_SPEED / speed
            self.pos = self.pos + h * self.vel
            for k in range(2):
                if self.pos[k] < -1.0 or self.pos[k] > 1.0:
                    self.pos[k] = float(np.clip(self.pos[k], -1.0, 1.0))
                    self.vel[k] = 0.0
        self._t += 1
        gap = self.pos - np.asarray(self.GOAL)
        reward = math.exp(-4.0 * float(np.dot(gap, gap)))
        return self._obs(), reward, self._t >= self.spec.episode_length


_ENVS = {
    "pendulum": lambda: Pendulum(sparse=False),
    "pendulum_sparse": lambda: Pendulum(sparse=True),
    "reacher2d": lambda: Reacher2D(),
}


def env_names() -> list[str]:
    return sorted(_ENVS)


def make_env(name: str):
    try:
        return _ENVS[name]()
    except KeyError:
        raise ConfigError(f"unknown env {name!r}; choose from {env_names()}") from None


def evaluate_policy(env_name: str, actor, n_episodes: int,
                    rng: np.random.Generator) -> float:
    """Mean undiscounted return of the deterministic policy over fresh episodes.

    Builds its own environment instances, so nothing about training state
    (buffer, networks, env) is touched.
    """
    total = 0.0
    for _ in range(n_episodes):
        env = make_env(env_name)
        obs = env.reset(rng)
        done = False
        while not done:
            action, _ = actor.sample(obs.reshape(1, -1), mode="deterministic")
            obs, reward, done = env.step(action.data[0])
            total += reward
    return total / n_episodes
