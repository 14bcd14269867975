"""Scratch: seed-robustness probe for priming divergence (heavy physics)."""
import sys

import numpy as np

from ofnlab.agent import AgentConfig, SacAgent
from ofnlab.envs import Pendulum
from ofnlab.replay import ReplayBuffer, Transition


class HeavyPendulum(Pendulum):
    GRAVITY = 14.0
    MAX_SPEED = 12.0
    DT = 0.08


def priming_probe(seed=0, n_updates=10000, **kw):
    cfg = AgentConfig(hidden=64, batch_size=64, initial_temperature=0.1,
                      target_entropy=-1.0, log_std_bounds=(-5.0, 2.0), **kw)
    env = HeavyPendulum()
    agent = SacAgent(cfg, 3, 1, seed=seed)
    rng = np.random.default_rng([seed, 99])
    buf = ReplayBuffer(600, 3, 1, np.random.default_rng([seed, 7]))
    obs = env.reset(rng)
    for _ in range(500):
        a = rng.uniform(-1, 1, 1)
        nxt, r, to = env.step(a)
        buf.push(Transition(obs, a, r, nxt, False))
        obs = env.reset(rng) if to else nxt
    peak = -1e18
    for u in range(1, n_updates + 1):
        agent.update_step(buf)
        if u % 250 == 0:
            probe = buf.sample(256)
            peak = max(peak, agent.mean_q(probe.s, probe.a))
    return peak


if __name__ == "__main__":
    which = sys.argv[1]
    seeds = [int(s) for s in sys.argv[2].split(",")]
    for seed in seeds:
        if which == "base":
            peak = priming_probe(seed)
        else:
            peak = priming_probe(seed, ofn=True)
        print(f"{which} seed {seed}: peak {peak:.1f}", flush=True)
