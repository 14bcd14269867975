"""Fast built-in invariant checks backing the `selftest` CLI subcommand."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import optim
from .aggregate import iqm
from .config import RunConfig, parse_config, serialize_config
from .diagnostics import effective_rank
from .networks import CriticNet, polyak_update


def _grad_check() -> str:
    rng = np.random.default_rng(7)
    net = CriticNet("c", 3, 2, hidden=8, ofn=True, rng=rng)
    s = rng.uniform(-1, 1, (4, 3))
    a = rng.uniform(-1, 1, (4, 2))
    y = rng.uniform(0, 1, (4, 1))

    tape = ad.Tape()
    q, _ = net.forward(s, a, tape=tape)
    loss = ad.mean_all(ad.square(ad.sub(q, ad.Tensor(y))))
    grads = tape.gradients(loss)

    def f(params):
        saved = net.params.vector
        net.params.load_dict({**{n: net.params.view(n) for n in net.params.names},
                              **params})
        qv, _ = net.forward(s, a)
        out = float(((qv.data - y) ** 2).mean())
        net.params.set_vector(saved)
        return out

    name = "c.head.weight"
    fd = ad.finite_difference_gradient(f, {name: net.params.view(name).copy()})
    err = np.abs(grads[name] - fd[name]).max()
    assert err < 1e-6, f"gradient check failed: {err}"
    return f"gradient check vs finite differences: max abs err {err:.2e}"


def _projection_check() -> str:
    rng = np.random.default_rng(11)
    x = rng.uniform(-2, 2, (16, 5))
    out = ad.unit_ball_project(ad.Tensor(x))
    norms = np.linalg.norm(out.data, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-9
    # contract the Jacobian with x itself: J^T x must vanish (tangency)
    tape = ad.Tape()
    xt = tape.leaf("x", x)
    proj = ad.unit_ball_project(xt)
    root = ad.sum_all(ad.mul(proj, ad.Tensor(x)))
    residual = np.abs(tape.gradients(root)["x"]).max()
    assert residual < 1e-8, residual
    return "unit-ball projection: norms == 1, gradients tangent to the sphere"


def _optimizer_check() -> str:
    rng = np.random.default_rng(3)
    hyper = optim.Hyper(lr=1e-2, beta1=0.0, bias_correction=False)
    adam = optim.init_state("adam", 4, hyper)
    rms = optim.init_state("rmsprop", 4, hyper)
    p_a = p_r = rng.normal(size=4)
    for _ in range(5):
        g = rng.normal(size=4)
        p_a, adam = optim.adam_step(adam, g, p_a)
        p_r, rms = optim.rmsprop_step(rms, g, p_r)
    assert np.array_equal(p_a, p_r), "adam(beta1=0) != rmsprop"
    return "adam with beta1=0 and no bias correction matches rmsprop bitwise"


def _polyak_check() -> str:
    rng = np.random.default_rng(5)
    a = CriticNet("a", 2, 1, hidden=4, rng=rng)
    b = a.clone("b")
    b.params.set_vector(rng.normal(size=b.params.size))
    init = b.params.vector.copy()
    for _ in range(50):
        polyak_update(b, a, 0.01)
    expected = (1 - 0.01) ** 50 * init + (1 - (1 - 0.01) ** 50) * a.params.vector
    err = np.abs(b.params.vector - expected).max()
    assert err < 1e-12, err
    return "polyak composition matches the closed form"


def _srank_check() -> str:
    rng = np.random.default_rng(9)
    for _ in range(20):
        m = rng.normal(size=(rng.integers(2, 20), rng.integers(2, 20)))
        sigma = np.linalg.svd(m, compute_uv=False)
        cum = np.cumsum(sigma) / sigma.sum()
        brute = int(np.argmax(cum >= 1 - 0.01) + 1)
        assert effective_rank(m) == brute
    assert effective_rank(np.eye(100)) == 99
    return "effective rank matches brute-force SVD scan"


def _tools_check() -> str:
    assert iqm(np.arange(1, 9)) == 4.5
    cfg = RunConfig()
    assert parse_config(serialize_config(cfg)) == cfg
    return "iqm oracle and config round-trip hold"


CHECKS = [_grad_check, _projection_check, _optimizer_check, _polyak_check,
          _srank_check, _tools_check]


def run_selftest(report=print) -> bool:
    ok = True
    for check in CHECKS:
        try:
            report(f"ok: {check()}")
        except AssertionError as err:
            report(f"FAIL {check.__name__}: {err}")
            ok = False
    return ok
