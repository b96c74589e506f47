"""Cross-modal transformer agent with view-action matching and an action-type gate.

Ablation rows (cumulative flags):

1. base: front view only, one linear classifier over [V_front; history].
2. +wide_view: all five views fused separately, concatenated, same classifier.
3. +view_act_matching: per-action FFN score over [V_view(a); A_a].
4. +act_type_gate: scores multiplied by exp-positive type weights.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .env.core import (ACTION_TYPES, ActionKind, N_ACTIONS, N_CATEGORIES, REGION_WIDTH,
                       split_view_regions)
from .nn import FeedForward, LayerNorm, Linear, Module, param
from .tensor import (Tensor, attention, concat, cross_entropy, exp, gelu, index, matmul,
                     take_rows)

NULL_ACTION = N_ACTIONS  # padding id in the history window
MASK_NEG = -1e9
FRONT, LEFT, RIGHT, UP, DOWN = range(5)


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    hidden: int = 64
    lang_layers: int = 2
    cross_layers: int = 2
    vocab_size: int = 88
    n_actions: int = N_ACTIONS
    n_views: int = 5
    n_categories: int = N_CATEGORIES
    history_len: int = 4
    max_tokens: int = 48
    wide_view: bool = True
    view_act_matching: bool = True
    act_type_gate: bool = True
    gate_lambda: float = 0.5

    def validate(self):
        if self.view_act_matching and not self.wide_view:
            raise ConfigError("view_act_matching requires wide_view")
        if self.act_type_gate and not self.view_act_matching:
            raise ConfigError("act_type_gate requires view_act_matching")
        for name in ("hidden", "lang_layers", "cross_layers", "vocab_size", "history_len", "max_tokens"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"model.{name} must be positive")
        if self.n_views != 5 or self.n_actions != N_ACTIONS or self.n_categories != N_CATEGORIES:
            raise ConfigError("n_views, n_actions and n_categories are fixed by the environment")
        return self

    @property
    def row(self) -> int:
        return 1 + self.wide_view + self.view_act_matching + self.act_type_gate

    def to_dict(self):
        return asdict(self)


ABLATION_ROWS = (
    (False, False, False),
    (True, False, False),
    (True, True, False),
    (True, True, True),
)


def assign_views_to_actions() -> np.ndarray:
    """View index each action kind is scored against (turns/looks -> their view, rest -> front)."""
    out = np.full(N_ACTIONS, FRONT, dtype=np.int64)
    out[ActionKind.TurnLeft] = LEFT
    out[ActionKind.TurnRight] = RIGHT
    out[ActionKind.LookUp] = UP
    out[ActionKind.LookDown] = DOWN
    return out


VIEW_OF_ACTION = assign_views_to_actions()
# (2, A) 0/1 map from type weights to per-action weights; Stop counts as manipulation
TYPE_TO_ACTION = np.stack([(ACTION_TYPES == t).astype(np.float64) for t in (0, 1)])


@dataclass
class StepBatch:
    tokens: np.ndarray          # (B, L) int
    token_mask: np.ndarray      # (B, L) bool, True = real token
    views: np.ndarray           # (B, 5, VIEW_WIDTH)
    history: np.ndarray         # (B, k) action ids, NULL_ACTION padded, oldest first
    front_visible: np.ndarray   # (B, C) bool
    action: np.ndarray | None = None   # (B,)
    obj: np.ndarray | None = None      # (B,) category id or -1

    def __len__(self):
        return self.tokens.shape[0]


@dataclass
class AgentOutput:
    scores: Tensor                 # (B, A): softmax/argmax operate on these
    object_logits: Tensor          # (B, C)
    match: Tensor | None = None    # (B, A) raw M
    gate: Tensor | None = None     # (B, A) positive per-action weights
    type_logits: Tensor | None = None  # (B, 2)


class SelfAttention(Module):
    def __init__(self, d, rng):
        self.q = Linear(d, d, rng)
        self.k = Linear(d, d, rng)
        self.v = Linear(d, d, rng)
        self.o = Linear(d, d, rng)

    def __call__(self, x, ctx=None, mask=None):
        ctx = x if ctx is None else ctx
        return self.o(attention(self.q(x), self.k(ctx), self.v(ctx), mask))


class LanguageLayer(Module):
    def __init__(self, d, rng):
        self.attn = SelfAttention(d, rng)
        self.ln1 = LayerNorm(d)
        self.ffn = FeedForward(d, 2 * d, rng)
        self.ln2 = LayerNorm(d)

    def __call__(self, x, mask):
        x = self.ln1(x + self.attn(x, mask=mask))
        return self.ln2(x + self.ffn(x))


class CrossModalLayer(Module):
    """Vision tokens attend to language, then to each other, then an FFN."""

    def __init__(self, d, rng):
        self.cross = SelfAttention(d, rng)
        self.ln1 = LayerNorm(d)
        self.self_attn = SelfAttention(d, rng)
        self.ln2 = LayerNorm(d)
        self.ffn = FeedForward(d, 2 * d, rng)
        self.ln3 = LayerNorm(d)

    def __call__(self, x, lang, lang_mask):
        x = self.ln1(x + self.cross(x, lang, lang_mask))
        x = self.ln2(x + self.self_attn(x))
        return self.ln3(x + self.ffn(x))


class MatchHead(Module):
    """Two-layer FFN over [V; A] -> scalar. fc1 is split by input half."""

    def __init__(self, d, rng):
        self.fc1 = Linear(2 * d, d, rng)
        self.fc2 = Linear(d, 1, rng)
        self.d = d

    def project_view(self, v: Tensor) -> Tensor:
        return matmul(v, index(self.fc1.weight, slice(0, self.d)))

    def project_action(self, a: Tensor) -> Tensor:
        return matmul(a, index(self.fc1.weight, slice(self.d, 2 * self.d))) + self.fc1.bias

    def head(self, h: Tensor) -> Tensor:
        out = self.fc2(gelu(h))
        return out.reshape(out.shape[:-1])

    def __call__(self, v: Tensor, a: Tensor) -> Tensor:
        return self.head(self.project_view(v) + self.project_action(a))


class VAMAgent(Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        d = cfg.hidden
        self.word_emb = param(rng.normal(0, 0.1, (cfg.vocab_size, d)))
        self.pos_emb = param(rng.normal(0, 0.1, (cfg.max_tokens, d)))
        self.lang_layers = [LanguageLayer(d, rng) for _ in range(cfg.lang_layers)]
        self.history = Linear(cfg.history_len * (N_ACTIONS + 1), d, rng)
        self.fuse_visual = Linear(REGION_WIDTH, d, rng)
        self.fuse_action = Linear(d, d, rng, bias=False)
        self.region_emb = param(rng.normal(0, 0.1, (3, d)))
        self.cross_layers = [CrossModalLayer(d, rng) for _ in range(cfg.cross_layers)]
        if cfg.view_act_matching:
            self.action_emb = param(rng.normal(0, 0.1, (N_ACTIONS, d)))
            self.match = MatchHead(d, rng)
        else:
            n_in = d * (5 if cfg.wide_view else 1) + d
            self.classifier = Linear(n_in, N_ACTIONS, rng)
        if cfg.act_type_gate:
            # own stream so rows 3 and 4 share every other parameter
            self.gate = Linear(5 * d, 2, np.random.default_rng([seed, 4]))
        self.object_head = Linear(d, N_CATEGORIES, rng)

    # -- encoders ---------------------------------------------------------
    def encode_language(self, tokens: np.ndarray, token_mask: np.ndarray | None = None) -> Tensor:
        """(B, L) token ids -> (B, L, d) contextual features."""
        tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        if tokens.shape[1] > self.cfg.max_tokens:
            raise ConfigError(f"{tokens.shape[1]} tokens exceed max_tokens={self.cfg.max_tokens}")
        if token_mask is None:
            token_mask = np.ones(tokens.shape, dtype=bool)
        x = take_rows(self.word_emb, tokens) + index(self.pos_emb, slice(0, tokens.shape[1]))
        mask = np.where(token_mask, 0.0, MASK_NEG)[:, None, :]
        for layer in self.lang_layers:
            x = layer(x, mask)
        return x

    def encode_history(self, history: np.ndarray) -> Tensor:
        """(B, k) previous action ids (NULL_ACTION padded) -> (B, d)."""
        history = np.atleast_2d(np.asarray(history, dtype=np.int64))
        b, k = history.shape
        if k != self.cfg.history_len:
            raise ConfigError(f"history window is {self.cfg.history_len}, got {k}")
        onehot = np.zeros((b, k, N_ACTIONS + 1))
        onehot[np.arange(b)[:, None], np.arange(k)[None, :], history] = 1.0
        return self.history(Tensor(onehot.reshape(b, -1)))

    def fuse_view(self, views: np.ndarray, hist: Tensor, lang: Tensor,
                  token_mask: np.ndarray | None = None) -> Tensor:
        """(B, nv, VIEW_WIDTH) raw views -> (B, nv, d) pooled cross-modal features V_i."""
        views = np.asarray(views, dtype=np.float64)
        regions = split_view_regions(views)  # (B, nv, 3, RW)
        if regions.shape[-1] != REGION_WIDTH:
            raise ConfigError(f"view width {views.shape[-1]} does not match the environment")
        b, d = hist.shape[0], self.cfg.hidden
        x = self.fuse_visual(Tensor(regions)) + self.fuse_action(hist).reshape(b, 1, 1, d)
        x = x + self.region_emb
        if token_mask is None:
            token_mask = np.ones(lang.shape[:2], dtype=bool)
        mask = np.where(token_mask, 0.0, MASK_NEG)[:, None, None, :]
        ctx = lang.reshape(b, 1, lang.shape[1], d)
        for layer in self.cross_layers:
            x = layer(x, ctx, mask)
        return x.mean(axis=2)

    # -- heads ------------------------------------------------------------
    def match_score(self, v: Tensor, a: Tensor) -> Tensor:
        return self.match(v, a)

    def gate_weights(self, feats: Tensor) -> tuple[Tensor, Tensor]:
        """(B, 5, d) -> (type logits (B, 2), per-action positive weights (B, A))."""
        b = feats.shape[0]
        logits = self.gate(feats.reshape(b, 5 * self.cfg.hidden))
        return logits, matmul(exp(logits), Tensor(TYPE_TO_ACTION))

    def forward(self, batch: StepBatch, gate_override: np.ndarray | None = None) -> AgentOutput:
        cfg = self.cfg
        lang = self.encode_language(batch.tokens, batch.token_mask)
        hist = self.encode_history(batch.history)
        views = batch.views if cfg.wide_view else batch.views[:, :1]
        feats = self.fuse_view(views, hist, lang, batch.token_mask)  # (B, nv, d)
        b, d = len(batch), cfg.hidden
        front = index(feats, (slice(None), 0))
        obj_logits = self.object_head(front)
        if not cfg.view_act_matching:
            flat = feats.reshape(b, feats.shape[1] * d)
            scores = self.classifier(concat([flat, hist], axis=-1))
            return AgentOutput(scores, obj_logits)
        pv = self.match.project_view(feats)                    # (B, 5, d)
        per_action = index(pv, (slice(None), VIEW_OF_ACTION))  # (B, A, d)
        m = self.match.head(per_action + self.match.project_action(self.action_emb))
        if gate_override is not None:
            gate = Tensor(np.broadcast_to(gate_override, m.shape))
            return AgentOutput(m * gate, obj_logits, m, gate)
        if not cfg.act_type_gate:
            return AgentOutput(m, obj_logits, m)
        type_logits, gate = self.gate_weights(feats)
        return AgentOutput(m * gate, obj_logits, m, gate, type_logits)

    __call__ = forward


def compute_loss(out: AgentOutput, batch: StepBatch, gate_lambda: float = 0.5) -> Tensor:
    """Action CE over gated scores + object CE on steps with an object + λ·gate-type CE."""
    action = np.asarray(batch.action, dtype=np.int64)
    if action.min() < 0 or action.max() >= N_ACTIONS:
        raise IndexError("ground-truth action outside the action set")
    loss = cross_entropy(out.scores, action)
    rows = np.flatnonzero(np.asarray(batch.obj) >= 0)
    if rows.size:
        loss = loss + cross_entropy(index(out.object_logits, rows), batch.obj[rows])
    if out.type_logits is not None:
        loss = loss + gate_lambda * cross_entropy(out.type_logits, ACTION_TYPES[action])
    return loss


def select_action(scores: np.ndarray, object_logits: np.ndarray | None = None,
                  visible: np.ndarray | None = None) -> tuple[int, int | None]:
    """Argmax action (lowest index wins ties) and, for manipulation, argmax visible category.

    Returns ``(action_id, category_id or None)``. With nothing visible the
    manipulation action is still returned, without an object.
    """
    a = int(np.argmax(scores))
    if ACTION_TYPES[a] == 0 or a == ActionKind.Stop or object_logits is None:
        return a, None
    vis = np.asarray(visible, dtype=bool)
    if not vis.any():
        return a, None
    masked = np.where(vis, object_logits, -np.inf)
    return a, int(np.argmax(masked))

