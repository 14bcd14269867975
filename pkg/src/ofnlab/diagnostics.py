"""Measurement instruments: in-distribution Q, effective rank, divergence flags.

Everything here is a pure function over a training snapshot; the harness
calls ``snapshot`` between update steps and appends the resulting record to
the run's JSONL metrics file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractViolation

# Fraction of spectral mass that may be discarded when counting dimensions.
SRANK_DELTA = 0.01

# Probe sizes: Q is averaged over a training-batch-sized sample; the feature
# matrix for rank estimation uses 10 samples per embedding dimension.
Q_PROBE_SIZE = 256
SRANK_SAMPLES_PER_DIM = 10


def effective_rank(features: np.ndarray, delta: float = SRANK_DELTA) -> int:
    """Smallest k whose top-k singular values hold a 1 - delta mass fraction.

    Singular values come from an eigendecomposition of the Gram matrix
    F^T F (sigma_i = sqrt(lambda_i)), which the test suite cross-checks
    against a direct SVD scan. An all-zero matrix has rank 0 by convention.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ContractViolation(f"expected a non-empty matrix, got {features.shape}")
    if not 0.0 < delta < 1.0:
        raise ContractViolation(f"delta must be in (0, 1), got {delta}")
    gram = features.T @ features
    eigvals = np.linalg.eigvalsh(gram)
    sigma = np.sqrt(np.clip(eigvals, 0.0, None))[::-1]
    total = sigma.sum()
    if total <= 0.0:
        return 0
    cumulative = np.cumsum(sigma) / total
    return int(np.searchsorted(cumulative, 1.0 - delta) + 1)


def divergence_flag(mean_q: float, gamma: float, r_max: float = 1.0,
                    kappa: float = 2.0) -> bool:
    """True when mean Q exceeds kappa times the analytic bound r_max / (1 - gamma)."""
    if not gamma < 1.0:
        raise ContractViolation(f"gamma must be < 1, got {gamma}")
    return bool(mean_q > kappa * r_max / (1.0 - gamma))


@dataclass
class MetricsRecord:
    """One diagnostic row; exactly this shape is serialized per JSONL line.

    `wallclock_s` is written as 0.0 so that rerunning a (config, seed) pair
    reproduces the metrics file byte-for-byte; real timings are reported in
    the run summary instead.
    """

    env_step: int
    grad_step: int
    eval_return: float | None
    mean_q_in_dist: float | None
    critic_loss: float | None
    actor_loss: float | None
    alpha: float
    adam_m_norm: float
    adam_v_norm: float
    srank: int | None
    layer_norms: list[float]
    diverged: bool
    seed: int
    wallclock_s: float = 0.0

    def to_json(self) -> str:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, float) and not np.isfinite(value):
                d[key] = None
        d["layer_norms"] = [v if np.isfinite(v) else None for v in d["layer_norms"]]
        return json.dumps(d, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "MetricsRecord":
        return cls(**json.loads(line))


def snapshot(agent, buffer, env_step: int, grad_step: int, seed: int,
             last_delta=None, eval_return: float | None = None) -> MetricsRecord:
    """Assemble one record: probe Q and features on buffer samples, read norms.

    Uses the buffer's own rng stream for the probe draws so records stay on
    the deterministic path.
    """
    from .networks import layer_weight_norms  # local to avoid cycle at import

    mean_q = None
    srank = None
    if len(buffer) > 0:
        probe = buffer.sample(Q_PROBE_SIZE)
        mean_q = agent.mean_q(probe.s, probe.a)
        n_feature_samples = SRANK_SAMPLES_PER_DIM * agent.config.hidden
        feats = buffer.sample(n_feature_samples)
        srank = effective_rank(agent.features(feats.s, feats.a))

    m_norm, v_norm = agent.critic_moment_norms()
    diverged = bool(last_delta is not None and last_delta.diverged)
    if mean_q is not None and np.isfinite(mean_q):
        diverged = diverged or divergence_flag(
            mean_q, agent.config.gamma, agent.config.reward_max,
            agent.config.divergence_kappa)

    return MetricsRecord(
        env_step=env_step,
        grad_step=grad_step,
        eval_return=eval_return,
        mean_q_in_dist=_jsonable(mean_q),
        critic_loss=_jsonable(last_delta.critic_loss if last_delta else None),
        actor_loss=_jsonable(last_delta.actor_loss if last_delta else None),
        alpha=agent.alpha,
        adam_m_norm=m_norm,
        adam_v_norm=v_norm,
        srank=srank,
        layer_norms=layer_weight_norms(agent.critics[0]),
        diverged=diverged,
        seed=seed,
    )


def _jsonable(value):
    """Map non-finite floats to None so every line stays valid strict JSON."""
    if value is None:
        return None
    value = float(value)
    return value if np.isfinite(value) else None
