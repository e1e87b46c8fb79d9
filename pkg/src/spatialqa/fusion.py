"""Forward-only, toy-scale grounding fusion.

Pipeline: frame tokens (tiled over class slots) attend over class text
embeddings, the attention output is concatenated with the tokens, the result
is gated by frame-level class probabilities, and two affine heads emit
tanh-bounded (x, y) direction components and rectified distances.
Nothing here is trained; parameters are seeded random draws.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .container import read_bundle, write_bundle
from .errors import DimensionError, ValidationError
from .features import FeatureTensor

_PROB_SLACK = 1e-9


@dataclass
class AgmOutput:
    probs: np.ndarray  # T x N
    embeddings: np.ndarray  # N x d

    def __post_init__(self):
        if self.probs.ndim != 2 or self.embeddings.ndim != 2:
            raise DimensionError("probs must be T x N and embeddings N x d")
        if self.probs.shape[1] != self.embeddings.shape[0]:
            raise DimensionError(
                f"probs cover {self.probs.shape[1]} classes but embeddings {self.embeddings.shape[0]}"
            )
        if np.any(np.isnan(self.probs)) or np.any(np.isnan(self.embeddings)):
            raise ValidationError("NaN in grounding outputs")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValidationError("grounding probabilities must lie in [0, 1]")


@dataclass
class AttentionParams:
    """Optional query/key/value projections; ``None`` means identity."""

    w_q: np.ndarray | None = None
    w_k: np.ndarray | None = None
    w_v: np.ndarray | None = None


@dataclass
class HeadParams:
    w_doa: np.ndarray  # (N * 2d) x (K * C * 2)
    b_doa: np.ndarray
    w_dist: np.ndarray  # (N * 2d) x (K * C)
    b_dist: np.ndarray

    def save(self, path) -> None:
        write_bundle(path, {k: getattr(self, k) for k in ("w_doa", "b_doa", "w_dist", "b_dist")})

    @classmethod
    def load(cls, path) -> HeadParams:
        arrays = read_bundle(path)
        missing = {"w_doa", "b_doa", "w_dist", "b_dist"} - arrays.keys()
        if missing:
            raise ValidationError(f"parameter bundle lacks sections {sorted(missing)}")
        return cls(**{k: arrays[k].astype(np.float64) for k in ("w_doa", "b_doa", "w_dist", "b_dist")})


@dataclass
class HeadOutputs:
    doa: np.ndarray  # T x K x C x 2
    dist: np.ndarray  # T x K x C


def _name_rng(name: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}\x00{name}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def mock_agm(num_frames: int, class_names: list[str], seed: int = 0, dim: int = 512) -> AgmOutput:
    """Deterministic stand-in for the frozen grounding model.

    Each class's embedding row and probability column depend only on
    ``(name, seed)``, so duplicate names give identical rows and permuting the
    class list permutes outputs the same way.
    """
    if not class_names:
        raise ValidationError("class list is empty")
    if num_frames < 1 or dim < 1:
        raise ValidationError("num_frames and dim must be >= 1")
    E = np.empty((len(class_names), dim))
    P = np.empty((num_frames, len(class_names)))
    for n, name in enumerate(class_names):
        rng = _name_rng(name, seed)
        row = rng.standard_normal(dim)
        E[n] = row / np.linalg.norm(row)
        # smooth logit random walk -> sigmoid, like frame-wise detection scores
        logits = np.cumsum(rng.normal(0.0, 0.7, num_frames)) + rng.normal(-1.0, 1.0)
        P[:, n] = 1.0 / (1.0 + np.exp(-logits))
    return AgmOutput(probs=P, embeddings=E)


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def cross_attention(Z_enc, E, params: AttentionParams | None = None, return_weights: bool = False):
    """Single-head scaled dot-product attention, queries from ``Z_enc``, keys/values ``E``."""
    Z_enc, E = np.asarray(Z_enc, dtype=np.float64), np.asarray(E, dtype=np.float64)
    if Z_enc.ndim != 3 or E.ndim != 2:
        raise DimensionError("Z_enc must be T x N x d and E must be N x d")
    if Z_enc.shape[1:] != E.shape:
        raise DimensionError(f"Z_enc {Z_enc.shape} does not match E {E.shape}")
    params = params or AttentionParams()
    q = Z_enc if params.w_q is None else Z_enc @ params.w_q
    k = E if params.w_k is None else E @ params.w_k
    v = E if params.w_v is None else E @ params.w_v
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError("query and key projections disagree on width")
    weights = _softmax(q @ k.T / np.sqrt(q.shape[-1]), axis=-1)  # T x N x N
    out = weights @ v
    return (out, weights) if return_weights else out


def fuse_and_gate(Z_enc, H, P) -> np.ndarray:
    Z_enc, H, P = (np.asarray(a, dtype=np.float64) for a in (Z_enc, H, P))
    if Z_enc.shape != H.shape or Z_enc.ndim != 3:
        raise DimensionError(f"Z_enc {Z_enc.shape} and H {H.shape} must share a T x N x d shape")
    if P.shape != Z_enc.shape[:2]:
        raise DimensionError(f"P {P.shape} does not match T x N = {Z_enc.shape[:2]}")
    if np.any(P < -_PROB_SLACK) or np.any(P > 1 + _PROB_SLACK) or np.any(np.isnan(P)):
        raise ValidationError("gating probabilities must lie in [0, 1]")
    P_norm = np.clip(P, 0.0, 1.0)
    F = np.concatenate([Z_enc, H], axis=-1)
    return P_norm[..., None] * F


def init_head_params(n_classes_agm: int, d: int, K: int, C: int, seed: int = 0, scale: float = 0.05) -> HeadParams:
    rng = np.random.default_rng(seed)
    width = n_classes_agm * 2 * d
    return HeadParams(
        w_doa=rng.normal(0.0, scale, (width, K * C * 2)),
        b_doa=np.zeros(K * C * 2),
        w_dist=rng.normal(0.0, scale, (width, K * C)),
        b_dist=np.zeros(K * C),
    )


def predict_heads(F_hat, head_params: HeadParams, K: int, C: int) -> HeadOutputs:
    F_hat = np.asarray(F_hat, dtype=np.float64)
    if K < 1 or C < 1:
        raise ValidationError("K and C must be >= 1")
    T = F_hat.shape[0]
    flat = F_hat.reshape(T, -1)
    hp = head_params
    if hp.w_doa.shape != (flat.shape[1], K * C * 2) or hp.b_doa.shape != (K * C * 2,):
        raise DimensionError(f"direction head expects {flat.shape[1]} -> {K * C * 2}, got {hp.w_doa.shape}")
    if hp.w_dist.shape != (flat.shape[1], K * C) or hp.b_dist.shape != (K * C,):
        raise DimensionError(f"distance head expects {flat.shape[1]} -> {K * C}, got {hp.w_dist.shape}")
    doa = np.tanh(flat @ hp.w_doa + hp.b_doa).reshape(T, K, C, 2)
    dist = np.maximum(0.0, flat @ hp.w_dist + hp.b_dist).reshape(T, K, C)
    return HeadOutputs(doa=doa, dist=dist)


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x**3)))


def encode_tokens(features: FeatureTensor, n_classes: int, d: int, seed: int = 0) -> np.ndarray:
    """Toy encoder: channel-average, standardize, GELU, random projection to ``d``.

    Returns ``T x N x d`` with each frame token tiled over the ``N`` class slots.
    """
    x = features.data.mean(axis=0)  # T x M
    x = (x - x.mean()) / (x.std() + 1e-8)
    x = _gelu(x)
    rng = np.random.default_rng(seed)
    proj = rng.standard_normal((x.shape[1], d)) / np.sqrt(x.shape[1])
    tokens = x @ proj
    return np.repeat(tokens[:, None, :], n_classes, axis=1)


def run_fusion(features: FeatureTensor, class_names: list[str], head_params: HeadParams,
               K: int, C: int, d: int = 512, seed: int = 0) -> HeadOutputs:
    agm = mock_agm(features.num_frames, class_names, seed=seed, dim=d)
    Z_enc = encode_tokens(features, len(class_names), d, seed=seed)
    H = cross_attention(Z_enc, agm.embeddings)
    return predict_heads(fuse_and_gate(Z_enc, H, agm.probs), head_params, K, C)
