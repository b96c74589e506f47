"""Central finite-difference gradient checking and the primitive suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor, no_grad

H = 1e-5
TOLERANCE = 1e-3


@dataclass
class GradCheckResult:
    name: str
    instances: int
    max_rel_error: float
    passed: bool


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(num / den)


def numeric_grad(f: Callable[[], float], x: np.ndarray, h: float = H, coords=None) -> np.ndarray:
    """∂f/∂x by central differences, perturbing ``x`` in place.

    With ``coords`` (flat indices) only those entries are estimated.
    """
    flat = x.reshape(-1)
    coords = range(flat.size) if coords is None else coords
    g = np.zeros(len(coords))
    for j, i in enumerate(coords):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        g[j] = (fp - fm) / (2 * h)
    return g


def check_gradients(fn: Callable[..., Tensor], inputs: Sequence[Tensor], h: float = H,
                    weights: np.ndarray | None = None) -> float:
    """Max relative error between backprop and finite differences of ``sum(w * fn(*inputs))``.

    A fixed random weighting turns a tensor output into a scalar.
    """
    out = fn(*inputs)
    if weights is None:
        weights = np.random.default_rng(12345).normal(size=out.shape)
    for t in inputs:
        t.grad = None
    (out * Tensor(weights)).sum().backward()

    def f():
        with no_grad():
            return float((fn(*inputs).data * weights).sum())

    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad.reshape(-1) if t.grad is not None else np.zeros(t.size)
        worst = max(worst, relative_error(analytic, numeric_grad(f, t.data, h)))
    return worst


def check_scalar_partial(loss_fn: Callable[[], Tensor], param: Tensor, coords, h: float = H) -> float:
    """Relative error of d loss / d param on selected flat coordinates."""
    param.grad = None
    loss_fn().backward()
    analytic = param.grad.reshape(-1)[list(coords)]

    def f():
        with no_grad():
            return loss_fn().item()

    return relative_error(analytic, numeric_grad(f, param.data, h, coords))


# -- suite ----------------------------------------------------------------
def _leaf(rng, *shape, positive=False):
    x = rng.normal(size=shape)
    if positive:
        x = np.abs(x) + 0.5
    return Tensor(x, requires_grad=True)


def _dims(rng, lo=1, hi=5, n=2):
    return [int(v) for v in rng.integers(lo, hi + 1, size=n)]


def _case_matmul(rng):
    m, k, n = _dims(rng, n=3)
    return T.matmul, [_leaf(rng, m, k), _leaf(rng, k, n)]


def _case_batched_matmul(rng):
    b, m, k, n = _dims(rng, n=4)
    return T.matmul, [_leaf(rng, b, m, k), _leaf(rng, 1, k, n)]


def _case_broadcast_arith(rng):
    m, n = _dims(rng, 2, 5)
    return (lambda a, b, c: (a + b) * c - a / (c * c + 1.0)), \
        [_leaf(rng, m, n), _leaf(rng, n), _leaf(rng, m, 1)]


def _case_softmax(rng):
    m, n = _dims(rng)
    return (lambda x: T.softmax(x, axis=-1)), [_leaf(rng, m, n)]


def _case_log_softmax(rng):
    m, n = _dims(rng)
    return (lambda x: T.log_softmax(x, axis=-1)), [_leaf(rng, m, n)]


def _case_cross_entropy(rng):
    b, c = _dims(rng, 2, 6)
    target = rng.integers(c, size=b)
    return (lambda x: T.cross_entropy(x, target)), [_leaf(rng, b, c)]


def _case_layer_norm(rng):
    m, d = _dims(rng, 2, 6)
    return T.layer_norm, [_leaf(rng, m, d), _leaf(rng, d), _leaf(rng, d)]


def _case_attention(rng):
    nq, nk, d = _dims(rng, n=3)
    return T.attention, [_leaf(rng, nq, d), _leaf(rng, nk, d), _leaf(rng, nk, d)]


def _case_elementwise(rng):
    m, n = _dims(rng)
    return (lambda x, p: T.gelu(x) + T.tanh(x) * T.exp(x * 0.3) + T.log(p)), \
        [_leaf(rng, m, n), _leaf(rng, m, n, positive=True)]


def _case_shape_ops(rng):
    a, b, c = _dims(rng, 2, 4, n=3)
    idx = rng.integers(a, size=4)

    def fn(x, y):
        z = T.concat([x, y], axis=-1).transpose(1, 0, 2).reshape(b, a * 2 * c)
        return T.index(z, (slice(None), idx)).sum(axis=0) + x.mean(axis=(0, 2)).sum()
    return fn, [_leaf(rng, a, b, c), _leaf(rng, a, b, c)]


def _case_embedding(rng):
    v, d = _dims(rng, 2, 6)
    ids = rng.integers(v, size=(3, 4))
    return (lambda w: T.take_rows(w, ids)), [_leaf(rng, v, d)]


PRIMITIVE_CASES = {
    "matmul": _case_matmul,
    "batched_matmul": _case_batched_matmul,
    "broadcast_arith": _case_broadcast_arith,
    "softmax": _case_softmax,
    "log_softmax": _case_log_softmax,
    "cross_entropy": _case_cross_entropy,
    "layer_norm": _case_layer_norm,
    "attention": _case_attention,
    "elementwise": _case_elementwise,
    "shape_ops": _case_shape_ops,
    "embedding": _case_embedding,
}


def check_primitive(name: str, instances: int = 20, seed: int = 0, tol: float = TOLERANCE) -> GradCheckResult:
    rng = np.random.default_rng([seed, sum(map(ord, name))])
    worst = 0.0
    for _ in range(instances):
        fn, inputs = PRIMITIVE_CASES[name](rng)
        worst = max(worst, check_gradients(fn, inputs))
    return GradCheckResult(name, instances, worst, worst < tol)


def check_model_loss(instances: int = 20, seed: int = 0, coords_per_instance: int = 8,
                     tol: float = TOLERANCE) -> GradCheckResult:
    """Full compute_loss vs finite differences on random parameters of a small agent."""
    from .agent import ModelConfig, VAMAgent, compute_loss
    from .data import build_step_table
    from .env.generate import episode_seed, make_episode
    from .env.language import Vocabulary

    vocab = Vocabulary()
    episodes = [make_episode(episode_seed("train", i, 99), "train") for i in range(3)]
    table = build_step_table(episodes, vocab, 2)
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    for i in range(instances):
        cfg = ModelConfig(hidden=8, lang_layers=1, cross_layers=1, vocab_size=len(vocab), history_len=2)
        model = VAMAgent(cfg, seed=int(rng.integers(1 << 30)))
        named = list(model.named_parameters())
        # every instance mixes action and manipulation rows so all heads are live
        rows = np.sort(rng.choice(len(table), size=6, replace=False))
        if not (table.obj[rows] >= 0).any():
            rows[0] = int(np.flatnonzero(table.obj >= 0)[i % int((table.obj >= 0).sum())])
            rows = np.sort(rows)
        batch = table.batch(rows)
        _, p = named[int(rng.integers(len(named)))]
        coords = rng.choice(p.size, size=min(coords_per_instance, p.size), replace=False)

        def loss_fn():
            return compute_loss(model(batch), batch, cfg.gate_lambda)

        worst = max(worst, check_scalar_partial(loss_fn, p, coords))
    return GradCheckResult("compute_loss", instances, worst, worst < tol)


def run_suite(instances: int = 20, seed: int = 0) -> list[GradCheckResult]:
    results = [check_primitive(name, instances, seed) for name in PRIMITIVE_CASES]
    results.append(check_model_loss(instances, seed))
    return results
