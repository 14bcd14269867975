"""Experiment orchestration: training runs, the priming protocol, fan-out.

A run directory contains:

* ``config.toml``   - the exact configuration, written before any training
* ``metrics.jsonl`` - one MetricsRecord per line, append-only
* ``checkpoint.json`` - final parameters of every network component
* ``summary.json``  - run totals, real wallclock, priming boundary (this is
  the only file allowed to differ between identical reruns)
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .agent import SacAgent
from .config import RunConfig, load_config, save_config, serialize_config
from .diagnostics import snapshot
from .envs import evaluate_policy, make_env
from .networks import checkpoint_save
from .replay import ReplayBuffer, Transition


class _Run:
    """Mutable state shared by the phases of one run."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        seed = cfg.experiment.seed
        self.env = make_env(cfg.experiment.env_name)
        spec = self.env.spec
        self.agent = SacAgent(cfg.agent, spec.state_dim, spec.action_dim, seed)

        env_ss, collect_ss, buffer_ss, eval_ss = \
            np.random.SeedSequence([seed, 0xE42]).spawn(4)
        self.env_rng = np.random.default_rng(env_ss)
        self.collect_rng = np.random.default_rng(collect_ss)
        self.eval_rng = np.random.default_rng(eval_ss)

        capacity = max(cfg.experiment.total_env_steps
                       + cfg.priming.n_random_samples, 1)
        self.buffer = ReplayBuffer(capacity, spec.state_dim, spec.action_dim,
                                   np.random.default_rng(buffer_ss))

        self.env_step = 0
        self.grad_step = 0
        self.last_delta = None
        self.diverged_any = False
        self.obs = self.env.reset(self.env_rng)
        self.run_dir = Path(cfg.experiment.out_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        save_config(cfg, self.run_dir / "config.toml")
        self._metrics = open(self.run_dir / "metrics.jsonl", "w", encoding="utf-8")
        self._start = time.monotonic()

    def emit(self, eval_return=None) -> None:
        record = snapshot(self.agent, self.buffer, self.env_step, self.grad_step,
                          self.cfg.experiment.seed, self.last_delta, eval_return)
        self.diverged_any = self.diverged_any or record.diverged
        self._metrics.write(record.to_json() + "\n")
        self._metrics.flush()

    def evaluate(self) -> float:
        return evaluate_policy(self.cfg.experiment.env_name, self.agent.actor,
                               self.cfg.experiment.eval_episodes, self.eval_rng)

    def maybe_reset(self) -> None:
        a = self.cfg.agent
        if a.reset_scope != "none" and a.reset_interval_steps > 0 \
                and self.env_step % a.reset_interval_steps == 0:
            self.agent.reset(a.reset_scope)

    def update(self, bc_active=False) -> None:
        self.last_delta = self.agent.update_step(self.buffer, bc_active=bc_active)
        self.grad_step += 1

    def step_env(self, random_action: bool) -> None:
        spec = self.env.spec
        if random_action:
            action = self.collect_rng.uniform(-1.0, 1.0, size=spec.action_dim)
        else:
            action = self.agent.act(self.obs, "stochastic")
        next_obs, reward, timeout = self.env.step(action)
        # Episodes only end by time limit here, so the bootstrap continues
        # through the boundary (done stays False in the buffer).
        self.buffer.push(Transition(self.obs, np.clip(action, -1.0, 1.0),
                                    reward, next_obs, done=False))
        self.env_step += 1
        self.obs = self.env.reset(self.env_rng) if timeout else next_obs

    def interaction_phase(self, n_steps: int, warmup: int) -> None:
        """Standard loop: act, store, update `utd` times, snapshot/eval on schedule."""
        e = self.cfg.experiment
        utd = self.cfg.agent.utd
        for i in range(n_steps):
            in_warmup = i < warmup
            self.step_env(random_action=in_warmup)
            if not in_warmup:
                for _ in range(utd):
                    self.update()
            self.maybe_reset()
            if self.env_step % e.snapshot_interval == 0:
                self.emit()
            if self.env_step % e.eval_interval == 0:
                self.emit(eval_return=self.evaluate())

    def finish(self, priming_boundary=None) -> Path:
        self._metrics.close()
        checkpoint_save(self.run_dir / "checkpoint.json", self.agent.components())
        summary = {
            "config_id": self.cfg.config_id(),
            "task": self.cfg.experiment.env_name,
            "seed": self.cfg.experiment.seed,
            "env_steps": self.env_step,
            "grad_steps": self.grad_step,
            "diverged_any": self.diverged_any,
            "wallclock_s": round(time.monotonic() - self._start, 3),
        }
        if priming_boundary is not None:
            summary["priming"] = priming_boundary
        (self.run_dir / "summary.json").write_text(json.dumps(summary, indent=2),
                                                   encoding="utf-8")
        return self.run_dir


def run_training(cfg: RunConfig) -> Path:
    """Plain training: warmup with random actions, then SAC at the configured UTD."""
    if cfg.experiment.mode != "train":
        raise ValueError(f"run_training got mode {cfg.experiment.mode!r}")
    run = _Run(cfg)
    run.interaction_phase(cfg.experiment.total_env_steps,
                          warmup=cfg.agent.init_random_steps)
    return run.finish()


def run_priming(cfg: RunConfig) -> Path:
    """Priming protocol: random collection, massed updates on frozen data, resume.

    Phase 1 collects ``n_random_samples`` transitions with a uniform-random
    policy. Phase 2 runs ``n_prime_updates`` gradient steps with no new data
    (env_step stays constant while grad_step advances); the behavioral-cloning
    actor term is active here when bc_coefficient > 0. Phase 3 trains
    normally for the remaining env-step budget.
    """
    if cfg.experiment.mode != "prime":
        raise ValueError(f"run_priming got mode {cfg.experiment.mode!r}")
    run = _Run(cfg)
    e = cfg.experiment
    p = cfg.priming

    for _ in range(p.n_random_samples):
        run.step_env(random_action=True)
        if run.env_step % e.snapshot_interval == 0:
            run.emit()

    bc_active = cfg.agent.bc_coefficient > 0.0
    for u in range(1, p.n_prime_updates + 1):
        run.update(bc_active=bc_active)
        if u % e.snapshot_interval == 0:
            run.emit()
        if u % e.eval_interval == 0:
            run.emit(eval_return=run.evaluate())
    if p.n_prime_updates % e.snapshot_interval != 0:
        run.emit()  # make the end-of-priming state visible in the metrics
    boundary = {"end_env_step": run.env_step, "end_grad_step": run.grad_step}

    remaining = max(e.total_env_steps - p.n_random_samples, 0)
    run.interaction_phase(remaining, warmup=0)
    return run.finish(priming_boundary=boundary)


def execute(cfg: RunConfig) -> Path:
    return run_priming(cfg) if cfg.experiment.mode == "prime" else run_training(cfg)


def _worker(config_text: str) -> str:
    from .config import parse_config

    return str(execute(parse_config(config_text)))


def run_many(configs: list[RunConfig], max_workers: int = 2) -> list[Path]:
    """Fan independent runs out to a process pool; each owns its run directory."""
    texts = [serialize_config(c) for c in configs]
    if max_workers <= 1 or len(configs) <= 1:
        return [Path(_worker(t)) for t in texts]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return [Path(p) for p in pool.map(_worker, texts)]


def load_run(run_dir) -> tuple[RunConfig, list]:
    """Read back a run directory's config and metrics records."""
    from .diagnostics import MetricsRecord

    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.toml")
    records = []
    metrics_path = run_dir / "metrics.jsonl"
    if metrics_path.exists():
        with open(metrics_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(MetricsRecord.from_json(line))
    return cfg, records
