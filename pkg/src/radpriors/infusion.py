"""Binary prior infusion in a desk-scale encoder-decoder stub.

The real report generators this mimics take a frontal/lateral image
pair, extract patch embeddings V, encode them into latents L, and decode
a token sequence. Here the whole stack is a small deterministic numpy
model so the infusion arithmetic can be tested exactly:

    V_new = V + P        right after the visual extractor, before the
                         positional encoding is added;
    L_new = L + P        right after the final encoder block.

P is a plain scalar broadcast over positions and channels. Infusion adds
no parameters: the model's weight count is identical with and without it.

Gradients are implemented by hand (reverse-mode over the fixed graph)
and validated against central finite differences in :func:`grad_check`.
All arithmetic is float64 with seeded initialization, so equal seeds
give bitwise-equal weights and outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "InfusionError",
    "ToyConfig",
    "ImagePair",
    "ToyModel",
    "ForwardResult",
    "GradCheckReport",
    "demo_image_pair",
    "visual_extract",
    "infuse",
    "forward",
    "forward_baseline",
    "teacher_forced_loss",
    "grad_check",
]

BOS_TOKEN = 0
EOS_TOKEN = 1


class InfusionError(ValueError):
    """Bad model input: wrong shapes, non-finite values, bad prior."""


@dataclass(frozen=True)
class ToyConfig:
    """Shapes for the stub model. Defaults give S=8 patches of dim 16."""

    image_size: int = 16
    patch_size: int = 8
    embed_dim: int = 16    # d, per-patch embedding width
    latent_dim: int = 16   # f, per-position latent width
    hidden_dim: int = 32
    vocab_size: int = 32
    max_len: int = 12
    seed: int = 17

    @property
    def patches_per_image(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def num_patches(self) -> int:
        # Frontal plus lateral view.
        return 2 * self.patches_per_image

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size


@dataclass(frozen=True)
class ImagePair:
    """A frontal and lateral view, each a square float image."""

    frontal: np.ndarray
    lateral: np.ndarray


def demo_image_pair(seed: int = 17, size: int = 16) -> ImagePair:
    """Deterministic synthetic image pair for demos and tests."""
    rng = np.random.default_rng(seed)
    return ImagePair(frontal=rng.uniform(-1.0, 1.0, (size, size)),
                     lateral=rng.uniform(-1.0, 1.0, (size, size)))


def _sinusoid(length: int, width: int) -> np.ndarray:
    """Fixed sinusoidal positional encoding; carries no parameters."""
    positions = np.arange(length, dtype=float)[:, None]
    channels = np.arange(width, dtype=float)[None, :]
    angles = positions / np.power(10000.0, 2.0 * (channels // 2) / width)
    table = np.where(channels % 2 == 0, np.sin(angles), np.cos(angles))
    return table


_PARAM_SHAPES = (
    # name, (rows source, cols source), fan-in source
    ("W_proj", ("patch_dim", "embed_dim"), "patch_dim"),
    ("W_q", ("embed_dim", "embed_dim"), "embed_dim"),
    ("W_k", ("embed_dim", "embed_dim"), "embed_dim"),
    ("W_v", ("embed_dim", "embed_dim"), "embed_dim"),
    ("W_o", ("embed_dim", "embed_dim"), "embed_dim"),
    ("W_f1", ("embed_dim", "hidden_dim"), "embed_dim"),
    ("b_f1", ("hidden_dim",), None),
    ("W_f2", ("hidden_dim", "embed_dim"), "hidden_dim"),
    ("b_f2", ("embed_dim",), None),
    ("W_lat", ("embed_dim", "latent_dim"), "embed_dim"),
    ("E", ("vocab_size", "latent_dim"), "latent_dim"),
    ("W_dq", ("latent_dim", "latent_dim"), "latent_dim"),
    ("W_dk", ("latent_dim", "latent_dim"), "latent_dim"),
    ("W_dv", ("latent_dim", "latent_dim"), "latent_dim"),
    ("W_do", ("latent_dim", "latent_dim"), "latent_dim"),
    ("W_g1", ("latent_dim", "hidden_dim"), "latent_dim"),
    ("b_g1", ("hidden_dim",), None),
    ("W_g2", ("hidden_dim", "latent_dim"), "hidden_dim"),
    ("b_g2", ("latent_dim",), None),
    ("W_out", ("latent_dim", "vocab_size"), "latent_dim"),
)


class ToyModel:
    """Parameter store plus the fixed positional tables."""

    def __init__(self, config: ToyConfig | None = None) -> None:
        self.config = config or ToyConfig()
        rng = np.random.default_rng(self.config.seed)
        self.params: dict[str, np.ndarray] = {}
        for name, shape_names, fan_in_name in _PARAM_SHAPES:
            shape = tuple(getattr(self.config, s) for s in shape_names)
            weights = rng.standard_normal(shape)
            if fan_in_name is not None:
                weights /= math.sqrt(getattr(self.config, fan_in_name))
            else:
                weights *= 0.1
            self.params[name] = weights
        self.enc_pos = _sinusoid(self.config.num_patches,
                                 self.config.embed_dim)
        self.dec_pos = _sinusoid(self.config.max_len, self.config.latent_dim)

    @classmethod
    def zeroed(cls, config: ToyConfig | None = None) -> "ToyModel":
        """All-zero weights; the decoder head then emits constant logits."""
        model = cls(config)
        for name in model.params:
            model.params[name] = np.zeros_like(model.params[name])
        return model

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())


def _check_prior(prior: float) -> float:
    try:
        value = float(prior)
    except (TypeError, ValueError) as exc:
        raise InfusionError(f"prior must be a real scalar, got {prior!r}") from exc
    if not math.isfinite(value):
        raise InfusionError(f"prior must be finite, got {value!r}")
    return value


def infuse(tensor: np.ndarray, prior: float) -> np.ndarray:
    """Broadcast-add the prior scalar over every position and channel."""
    value = _check_prior(prior)
    return np.asarray(tensor, dtype=float) + value


def _flatten_patches(images: ImagePair, config: ToyConfig) -> np.ndarray:
    size = config.image_size
    patch = config.patch_size
    rows = []
    for view_name in ("frontal", "lateral"):
        view = np.asarray(getattr(images, view_name), dtype=float)
        if view.shape != (size, size):
            raise InfusionError(
                f"{view_name} image must have shape {(size, size)}, "
                f"got {view.shape}")
        if not np.isfinite(view).all():
            raise InfusionError(f"{view_name} image contains non-finite values")
        for i in range(0, size, patch):
            for j in range(0, size, patch):
                rows.append(view[i:i + patch, j:j + patch].reshape(-1))
    return np.stack(rows)


def visual_extract(images: ImagePair, model: ToyModel) -> np.ndarray:
    """Project flattened patches to the (S, d) embedding.

    The projection has no bias, so all-zero images map to the all-zero
    embedding. Frontal patches occupy the first S/2 rows; swapping the
    views therefore changes the embedding.
    """
    patches = _flatten_patches(images, model.config)
    return patches @ model.params["W_proj"]


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def _encode(model: ToyModel, patches: np.ndarray,
            prior: float | None) -> dict[str, np.ndarray]:
    """Run extractor and encoder, keeping intermediates for backprop.

    ``prior=None`` removes the infusion steps entirely (the baseline
    path), which is distinct from adding a zero.
    """
    p = model.params
    d = model.config.embed_dim
    V = patches @ p["W_proj"]
    V1 = V if prior is None else V + prior
    V2 = V1 + model.enc_pos
    Q = V2 @ p["W_q"]
    K = V2 @ p["W_k"]
    Vv = V2 @ p["W_v"]
    scores = Q @ K.T / math.sqrt(d)
    A = _softmax_rows(scores)
    C = A @ Vv
    H = V2 + C @ p["W_o"]
    U = H @ p["W_f1"] + p["b_f1"]
    F = np.tanh(U)
    H2 = H + F @ p["W_f2"] + p["b_f2"]
    L = H2 @ p["W_lat"]
    Ln = L if prior is None else L + prior
    if not np.isfinite(Ln).all():
        raise InfusionError("encoder produced non-finite latents")
    return {"patches": patches, "V2": V2, "Q": Q, "K": K, "Vv": Vv,
            "A": A, "C": C, "H": H, "F": F, "H2": H2, "L": L, "Ln": Ln}


def _decoder_step(model: ToyModel, Kd: np.ndarray, Vd: np.ndarray,
                  token: int, position: int) -> dict[str, np.ndarray]:
    p = model.params
    f = model.config.latent_dim
    q = p["E"][token] + model.dec_pos[position]
    r = q @ p["W_dq"]
    s = Kd @ r / math.sqrt(f)
    a = _softmax_rows(s)
    m = a @ Vd
    c = m @ p["W_do"]
    h = q + c
    u = h @ p["W_g1"] + p["b_g1"]
    g = np.tanh(u)
    z = h + g @ p["W_g2"] + p["b_g2"]
    logits = z @ p["W_out"]
    return {"q": q, "r": r, "a": a, "m": m, "h": h, "g": g, "z": z,
            "logits": logits}


@dataclass
class ForwardResult:
    """Decoded tokens plus the latents before and after infusion."""

    tokens: list[int]
    latent: np.ndarray
    latent_infused: np.ndarray


def _greedy_decode(model: ToyModel, Ln: np.ndarray,
                   max_len: int) -> list[int]:
    p = model.params
    Kd = Ln @ p["W_dk"]
    Vd = Ln @ p["W_dv"]
    tokens: list[int] = []
    token = BOS_TOKEN
    for position in range(max_len):
        step = _decoder_step(model, Kd, Vd, token, position)
        if not np.isfinite(step["logits"]).all():
            raise InfusionError("decoder produced non-finite logits")
        token = int(np.argmax(step["logits"]))
        tokens.append(token)
        if token == EOS_TOKEN:
            break
    return tokens


def forward(model: ToyModel, images: ImagePair, prior: float,
            max_len: int | None = None) -> ForwardResult:
    """Full infused forward pass: images to greedy token sequence."""
    value = _check_prior(prior)
    max_len = model.config.max_len if max_len is None else max_len
    patches = _flatten_patches(images, model.config)
    state = _encode(model, patches, value)
    tokens = _greedy_decode(model, state["Ln"], max_len)
    return ForwardResult(tokens=tokens, latent=state["L"],
                         latent_infused=state["Ln"])


def forward_baseline(model: ToyModel, images: ImagePair,
                     max_len: int | None = None) -> ForwardResult:
    """Forward pass with the infusion steps deleted (not P=0 added)."""
    max_len = model.config.max_len if max_len is None else max_len
    patches = _flatten_patches(images, model.config)
    state = _encode(model, patches, None)
    tokens = _greedy_decode(model, state["Ln"], max_len)
    return ForwardResult(tokens=tokens, latent=state["L"],
                         latent_infused=state["Ln"])


DEFAULT_PROBE = (2, 3, 4, 5, 6, 7)


def teacher_forced_loss(model: ToyModel, images: ImagePair, prior: float,
                        probe: tuple[int, ...] = DEFAULT_PROBE,
                        scale: float = 1.0,
                        ) -> tuple[float, dict[str, np.ndarray], float]:
    """Scalar probe loss with analytic gradients.

    The loss is ``scale`` times the sum of all pre-softmax decoder
    outputs along a fixed teacher-forced token sequence, which keeps it
    smooth in every parameter (greedy argmax choices would not be).
    Returns (loss, weight gradients, d loss / d prior).
    """
    value = _check_prior(prior)
    p = model.params
    config = model.config
    if len(probe) > config.max_len:
        raise InfusionError(
            f"probe length {len(probe)} exceeds max_len {config.max_len}")
    if any(not 0 <= t < config.vocab_size for t in probe):
        raise InfusionError("probe tokens must lie in the vocabulary")

    patches = _flatten_patches(images, config)
    state = _encode(model, patches, value)
    Ln = state["Ln"]
    Kd = Ln @ p["W_dk"]
    Vd = Ln @ p["W_dv"]
    steps = [_decoder_step(model, Kd, Vd, token, position)
             for position, token in enumerate(probe)]
    loss = scale * math.fsum(float(step["logits"].sum()) for step in steps)

    grads = {name: np.zeros_like(array) for name, array in p.items()}
    d_prior = 0.0
    sqrt_f = math.sqrt(config.latent_dim)
    sqrt_d = math.sqrt(config.embed_dim)

    dKd = np.zeros_like(Kd)
    dVd = np.zeros_like(Vd)
    for position, token in enumerate(probe):
        step = steps[position]
        dlogits = np.full(config.vocab_size, scale)
        grads["W_out"] += np.outer(step["z"], dlogits)
        dz = p["W_out"] @ dlogits
        grads["b_g2"] += dz
        grads["W_g2"] += np.outer(step["g"], dz)
        dg = dz @ p["W_g2"].T
        dh = dz.copy()
        du = dg * (1.0 - step["g"] ** 2)
        grads["W_g1"] += np.outer(step["h"], du)
        grads["b_g1"] += du
        dh += du @ p["W_g1"].T
        dc = dh
        dq = dh.copy()
        grads["W_do"] += np.outer(step["m"], dc)
        dm = dc @ p["W_do"].T
        dVd += np.outer(step["a"], dm)
        da = Vd @ dm
        ds = step["a"] * (da - float(da @ step["a"]))
        dKd += np.outer(ds, step["r"]) / sqrt_f
        dr = Kd.T @ ds / sqrt_f
        grads["W_dq"] += np.outer(step["q"], dr)
        dq += dr @ p["W_dq"].T
        grads["E"][token] += dq

    dLn = dKd @ p["W_dk"].T + dVd @ p["W_dv"].T
    grads["W_dk"] += Ln.T @ dKd
    grads["W_dv"] += Ln.T @ dVd
    d_prior += float(dLn.sum())

    dH2 = dLn @ p["W_lat"].T
    grads["W_lat"] += state["H2"].T @ dLn
    dH = dH2.copy()
    grads["W_f2"] += state["F"].T @ dH2
    grads["b_f2"] += dH2.sum(axis=0)
    dF = dH2 @ p["W_f2"].T
    dU = dF * (1.0 - state["F"] ** 2)
    grads["W_f1"] += state["H"].T @ dU
    grads["b_f1"] += dU.sum(axis=0)
    dH += dU @ p["W_f1"].T

    dV2 = dH.copy()
    dC = dH @ p["W_o"].T
    grads["W_o"] += state["C"].T @ dH
    dA = dC @ state["Vv"].T
    dVv = state["A"].T @ dC
    row_dot = (dA * state["A"]).sum(axis=1, keepdims=True)
    dScores = state["A"] * (dA - row_dot)
    dQ = dScores @ state["K"] / sqrt_d
    dK = dScores.T @ state["Q"] / sqrt_d
    grads["W_q"] += state["V2"].T @ dQ
    dV2 += dQ @ p["W_q"].T
    grads["W_k"] += state["V2"].T @ dK
    dV2 += dK @ p["W_k"].T
    grads["W_v"] += state["V2"].T @ dVv
    dV2 += dVv @ p["W_v"].T

    d_prior += float(dV2.sum())
    grads["W_proj"] += patches.T @ dV2
    return loss, grads, d_prior


@dataclass
class GradCheckReport:
    """Analytic vs finite-difference agreement for sampled parameters."""

    max_rel_error: float
    per_param: dict[str, float]
    prior_analytic: float
    prior_fd: float


def _rel_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), 1e-6)
    return abs(analytic - numeric) / denom


def grad_check(model: ToyModel, images: ImagePair, prior: float,
               step: float = 1e-4, probe: tuple[int, ...] = DEFAULT_PROBE,
               sample_seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    One entry of every parameter array is sampled (seeded, so the choice
    is reproducible) along with d loss / d prior.
    """
    loss, grads, d_prior = teacher_forced_loss(model, images, prior, probe)
    del loss
    rng = np.random.default_rng(sample_seed)
    per_param: dict[str, float] = {}

    def loss_at(prior_value: float) -> float:
        value, _, _ = teacher_forced_loss(model, images, prior_value, probe)
        return value

    for name, array in model.params.items():
        flat_index = int(rng.integers(array.size))
        index = np.unravel_index(flat_index, array.shape)
        original = array[index]
        array[index] = original + step
        plus = loss_at(prior)
        array[index] = original - step
        minus = loss_at(prior)
        array[index] = original
        numeric = (plus - minus) / (2.0 * step)
        per_param[name] = _rel_error(float(grads[name][index]), numeric)

    prior_fd = (loss_at(prior + step) - loss_at(prior - step)) / (2.0 * step)
    per_param["prior"] = _rel_error(d_prior, prior_fd)
    return GradCheckReport(
        max_rel_error=max(per_param.values()),
        per_param=per_param,
        prior_analytic=d_prior,
        prior_fd=prior_fd,
    )
