"""LSTM encoder-decoder sequence autoencoder, implemented from scratch.

The encoder folds a window of feature vectors into a fixed-size (hidden,
cell) state; the decoder unrolls that state back into a reconstructed
window, consuming its own previous projected output at inference time and
the ground-truth previous message while training (teacher forcing). All
math is float64 numpy; gradients are exact backpropagation through time
and are validated against central finite differences in the test suite.

Gate order inside the stacked weight matrices is [input, forget,
cell-candidate, output]:

    z = W_x x + W_h h + b,  split into (z_i, z_f, z_g, z_o)
    i = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
    c' = f * c + i * g
    h' = o * tanh(c')

By default the decoder emits the window in reverse order (last message
first), which keeps the shortest credit-assignment path between the encoder
summary and the most recent inputs; ``reconstruct`` re-aligns outputs
index-for-index with the input window either way.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .features import Normalizer, Window, stack_windows
from .geodesy import AveragePath, GeoPoint, RouteProfile

MODEL_FILE_VERSION = 1

INIT_WEIGHT_SCALE = 0.08
ADAM_EPS = 1e-8


class NumericsError(ArithmeticError):
    """Base class for numeric failures during training or loss evaluation."""


class NonFiniteLossError(NumericsError):
    def __init__(self, window_index: int):
        super().__init__(f"non-finite loss produced by window {window_index} of the batch")
        self.window_index = window_index


class TrainingDivergedError(NumericsError):
    def __init__(self, epoch: int, detail: str = "non-finite loss"):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


class ModelFileError(ValueError):
    """Corrupt or structurally invalid model file."""


class ModelVersionError(ModelFileError):
    """Model file written by an unsupported format version."""


@dataclass
class LstmParams:
    """Stacked gate weights: w_x is (4h, d), w_h is (4h, h), b is (4h,)."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        self.w_x = np.asarray(self.w_x, dtype=np.float64)
        self.w_h = np.asarray(self.w_h, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        four_h = self.w_x.shape[0]
        if four_h % 4 != 0 or self.w_h.shape != (four_h, four_h // 4) or self.b.shape != (four_h,):
            raise ValueError(
                f"inconsistent LSTM shapes: w_x {self.w_x.shape}, w_h {self.w_h.shape}, b {self.b.shape}"
            )

    @property
    def hidden_size(self) -> int:
        return self.w_x.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.w_x.shape[1]


@dataclass
class LstmState:
    """Hidden and cell vectors; leading batch dimensions are allowed."""

    h: np.ndarray
    c: np.ndarray


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


class _StepCache(NamedTuple):
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tc: np.ndarray


def _step(p: LstmParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray, _StepCache]:
    hidden = p.hidden_size
    z = x @ p.w_x.T + h_prev @ p.w_h.T + p.b
    i = _sigmoid(z[..., :hidden])
    f = _sigmoid(z[..., hidden : 2 * hidden])
    g = np.tanh(z[..., 2 * hidden : 3 * hidden])
    o = _sigmoid(z[..., 3 * hidden :])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, _StepCache(x, h_prev, c_prev, i, f, g, o, c, tc)


def _step_backward(
    p: LstmParams,
    cache: _StepCache,
    dh: np.ndarray,
    dc: np.ndarray,
    grads: dict[str, np.ndarray],
    prefix: str,
) -> tuple[np.ndarray, np.ndarray]:
    """One BPTT step; accumulates into grads, returns (dh_prev, dc_prev)."""
    do = dh * cache.tc
    dc = dc + dh * cache.o * (1.0 - cache.tc**2)
    dzo = do * cache.o * (1.0 - cache.o)
    dzf = dc * cache.c_prev * cache.f * (1.0 - cache.f)
    dzi = dc * cache.g * cache.i * (1.0 - cache.i)
    dzg = dc * cache.i * (1.0 - cache.g**2)
    dz = np.concatenate([dzi, dzf, dzg, dzo], axis=-1)
    grads[prefix + ".w_x"] += dz.T @ cache.x
    grads[prefix + ".w_h"] += dz.T @ cache.h_prev
    grads[prefix + ".b"] += dz.sum(axis=0)
    return dz @ p.w_h, dc * cache.f


def lstm_step(p: LstmParams, x: np.ndarray, state: LstmState) -> LstmState:
    """Advance one LSTM cell step. ``x`` is (d,) or (batch, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.input_size:
        raise ValueError(f"input size {x.shape[-1]} does not match params ({p.input_size})")
    if state.h.shape[-1] != p.hidden_size:
        raise ValueError(f"state size {state.h.shape[-1]} does not match params ({p.hidden_size})")
    h, c, _ = _step(p, x, state.h, state.c)
    return LstmState(h=h, c=c)


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    clip_norm: float = 5.0
    val_fraction: float = 0.1
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.epochs, self.batch_size, self.patience) < 1:
            raise ValueError("epochs, batch_size, and patience must be positive")
        if min(self.learning_rate, self.beta1, self.beta2, self.clip_norm) <= 0:
            raise ValueError("learning rate, moment coefficients, and clip norm must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass
class EncoderDecoderModel:
    encoder: LstmParams
    decoder: LstmParams
    proj_w: np.ndarray  # (d, h)
    proj_b: np.ndarray  # (d,)
    hidden_size: int
    window_len: int
    reverse_reconstruction: bool = True
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.proj_w = np.asarray(self.proj_w, dtype=np.float64)
        self.proj_b = np.asarray(self.proj_b, dtype=np.float64)
        d = self.encoder.input_size
        if self.decoder.input_size != d or self.proj_w.shape != (d, self.hidden_size):
            raise ValueError("encoder/decoder/projection dimensions disagree")
        if self.encoder.hidden_size != self.hidden_size or self.decoder.hidden_size != self.hidden_size:
            raise ValueError("hidden sizes disagree")
        if self.proj_b.shape != (d,):
            raise ValueError("projection bias has the wrong shape")
        if self.window_len < 2:
            raise ValueError("window length must be at least 2")

    @property
    def feature_dim(self) -> int:
        return self.encoder.input_size


def model_parameters(model: EncoderDecoderModel) -> dict[str, np.ndarray]:
    """Live views of every trainable array, in a fixed order."""
    return {
        "encoder.w_x": model.encoder.w_x,
        "encoder.w_h": model.encoder.w_h,
        "encoder.b": model.encoder.b,
        "decoder.w_x": model.decoder.w_x,
        "decoder.w_h": model.decoder.w_h,
        "decoder.b": model.decoder.b,
        "proj_w": model.proj_w,
        "proj_b": model.proj_b,
    }


def init_model(
    feature_dim: int,
    hidden_size: int,
    window_len: int,
    reverse_reconstruction: bool,
    rng: np.random.Generator,
) -> EncoderDecoderModel:
    """Uniform(-0.08, 0.08) initialization, drawn in a fixed order."""

    def u(*shape: int) -> np.ndarray:
        return rng.uniform(-INIT_WEIGHT_SCALE, INIT_WEIGHT_SCALE, size=shape)

    enc = LstmParams(u(4 * hidden_size, feature_dim), u(4 * hidden_size, hidden_size), u(4 * hidden_size))
    dec = LstmParams(u(4 * hidden_size, feature_dim), u(4 * hidden_size, hidden_size), u(4 * hidden_size))
    return EncoderDecoderModel(
        encoder=enc,
        decoder=dec,
        proj_w=u(feature_dim, hidden_size),
        proj_b=u(feature_dim),
        hidden_size=hidden_size,
        window_len=window_len,
        reverse_reconstruction=reverse_reconstruction,
    )


def _as_batch(windows: np.ndarray | list[Window]) -> np.ndarray:
    if isinstance(windows, np.ndarray):
        batch = windows.astype(np.float64, copy=False)
        if batch.ndim == 2:
            batch = batch[None]
    else:
        batch = stack_windows(windows)
    if batch.ndim != 3:
        raise ValueError(f"expected a (batch, L, d) array, got shape {batch.shape}")
    return batch


def _encode_batch(model: EncoderDecoderModel, batch: np.ndarray, keep_caches: bool = False):
    n = batch.shape[0]
    h = np.zeros((n, model.hidden_size))
    c = np.zeros((n, model.hidden_size))
    caches = []
    for t in range(batch.shape[1]):
        h, c, cache = _step(model.encoder, batch[:, t], h, c)
        if keep_caches:
            caches.append(cache)
    return h, c, caches


def _decode_batch(
    model: EncoderDecoderModel,
    h: np.ndarray,
    c: np.ndarray,
    steps: int,
    teacher_inputs: np.ndarray | None = None,
    keep_caches: bool = False,
):
    """Unroll the decoder. ``teacher_inputs`` (n, steps, d), when given, feeds
    ground truth shifted by one step (training); otherwise the decoder feeds
    back its own projected outputs (inference)."""
    n = h.shape[0]
    d = model.feature_dim
    outputs = np.zeros((n, steps, d))
    hiddens = np.zeros((n, steps, model.hidden_size))
    caches = []
    x = np.zeros((n, d))
    for j in range(steps):
        if j > 0:
            x = teacher_inputs[:, j - 1] if teacher_inputs is not None else outputs[:, j - 1]
        h, c, cache = _step(model.decoder, x, h, c)
        hiddens[:, j] = h
        outputs[:, j] = h @ model.proj_w.T + model.proj_b
        if keep_caches:
            caches.append(cache)
    return outputs, hiddens, caches


def encode(model: EncoderDecoderModel, window: Window | np.ndarray) -> LstmState:
    """Final encoder state after consuming the window from a zero state."""
    values = window.values if isinstance(window, Window) else np.asarray(window, dtype=np.float64)
    if values.shape != (model.window_len, model.feature_dim):
        raise ValueError(
            f"window shape {values.shape} does not match model "
            f"({model.window_len}, {model.feature_dim})"
        )
    h, c, _ = _encode_batch(model, values[None])
    return LstmState(h=h[0], c=c[0])


def decode(model: EncoderDecoderModel, state: LstmState) -> np.ndarray:
    """Autoregressive reconstruction from an encoder state, in the model's
    emission order (reversed when ``reverse_reconstruction`` is set)."""
    if state.h.shape != (model.hidden_size,) or state.c.shape != (model.hidden_size,):
        raise ValueError("state dimensions do not match the model")
    outputs, _, _ = _decode_batch(model, state.h[None].copy(), state.c[None].copy(), model.window_len)
    return outputs[0]


def reconstruct(model: EncoderDecoderModel, window: Window | np.ndarray) -> np.ndarray:
    """decode(encode(w)) with outputs re-aligned index-for-index with ``w``."""
    out = decode(model, encode(model, window))
    return out[::-1].copy() if model.reverse_reconstruction else out


def reconstruct_windows(model: EncoderDecoderModel, batch: np.ndarray | list[Window]) -> np.ndarray:
    """Batched autoregressive reconstruction, aligned with the inputs.
    Per-window results are independent of what else shares the batch."""
    x = _as_batch(batch)
    if x.shape[1] != model.window_len or x.shape[2] != model.feature_dim:
        raise ValueError(f"batch shape {x.shape} does not match the model")
    h, c, _ = _encode_batch(model, x)
    out, _, _ = _decode_batch(model, h, c, model.window_len)
    return out[:, ::-1].copy() if model.reverse_reconstruction else out


def _loss_forward(model: EncoderDecoderModel, batch: np.ndarray, keep_caches: bool):
    targets = batch[:, ::-1] if model.reverse_reconstruction else batch
    h, c, enc_caches = _encode_batch(model, batch, keep_caches=keep_caches)
    outputs, hiddens, dec_caches = _decode_batch(
        model, h, c, batch.shape[1], teacher_inputs=targets, keep_caches=keep_caches
    )
    residual = outputs - targets
    loss = float(np.mean(residual**2))
    return loss, residual, hiddens, enc_caches, dec_caches


def loss_and_gradients(
    model: EncoderDecoderModel, windows: np.ndarray | list[Window]
) -> tuple[float, dict[str, np.ndarray]]:
    """Teacher-forced reconstruction MSE over a batch plus exact BPTT
    gradients for every parameter.

    The loss averages squared error over batch, messages, and components.
    """
    batch = _as_batch(windows)
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    loss, residual, hiddens, enc_caches, dec_caches = _loss_forward(model, batch, keep_caches=True)
    if not np.isfinite(loss):
        for idx in range(batch.shape[0]):
            one, _, _, _, _ = _loss_forward(model, batch[idx : idx + 1], keep_caches=False)
            if not np.isfinite(one):
                raise NonFiniteLossError(idx)
        raise NonFiniteLossError(0)

    n, steps, d = batch.shape
    grads = {name: np.zeros_like(arr) for name, arr in model_parameters(model).items()}
    d_out = 2.0 * residual / residual.size

    grads["proj_w"] += d_out.reshape(-1, d).T @ hiddens.reshape(-1, model.hidden_size)
    grads["proj_b"] += d_out.sum(axis=(0, 1))

    dh = np.zeros((n, model.hidden_size))
    dc = np.zeros((n, model.hidden_size))
    for j in range(steps - 1, -1, -1):
        dh = dh + d_out[:, j] @ model.proj_w
        dh, dc = _step_backward(model.decoder, dec_caches[j], dh, dc, grads, "decoder")
    for t in range(steps - 1, -1, -1):
        dh, dc = _step_backward(model.encoder, enc_caches[t], dh, dc, grads, "encoder")
    return loss, grads


def teacher_forced_loss(model: EncoderDecoderModel, windows: np.ndarray | list[Window]) -> float:
    batch = _as_batch(windows)
    loss, _, _, _, _ = _loss_forward(model, batch, keep_caches=False)
    return loss


def _clip_gradients(grads: dict[str, np.ndarray], clip_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g**2)) for g in grads.values()))
    if total > clip_norm:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale


def train(
    windows: np.ndarray | list[Window],
    cfg: TrainConfig,
    hidden_size: int = 64,
    reverse_reconstruction: bool = True,
) -> EncoderDecoderModel:
    """Fit an encoder-decoder to reconstruct benign windows.

    Seeded uniform init, Adam with gradient-norm clipping, best-validation
    snapshot with early stopping after ``cfg.patience`` stagnant epochs.
    Deterministic given the seed.
    """
    data = _as_batch(windows)
    n, window_len, feature_dim = data.shape
    if n < 1:
        raise ValueError("need at least one training window")

    rng = np.random.default_rng(cfg.seed)
    model = init_model(feature_dim, hidden_size, window_len, reverse_reconstruction, rng)
    params = model_parameters(model)

    perm = rng.permutation(n)
    n_val = int(round(cfg.val_fraction * n))
    n_val = min(max(n_val, 1), n - 1) if n >= 2 else 0
    val_idx = perm[:n_val]
    train_idx = perm[n_val:] if n_val else perm
    val_set = data[val_idx] if n_val else data

    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0

    best_val = np.inf
    best_params: dict[str, np.ndarray] = {k: v.copy() for k, v in params.items()}
    best_epoch = 0
    epochs_run = 0

    for epoch in range(1, cfg.epochs + 1):
        epochs_run = epoch
        order = rng.permutation(len(train_idx))
        for lo in range(0, len(order), cfg.batch_size):
            batch = data[train_idx[order[lo : lo + cfg.batch_size]]]
            try:
                loss, grads = loss_and_gradients(model, batch)
            except NonFiniteLossError as exc:
                raise TrainingDivergedError(epoch, str(exc)) from exc
            _clip_gradients(grads, cfg.clip_norm)
            step += 1
            bias1 = 1.0 - cfg.beta1**step
            bias2 = 1.0 - cfg.beta2**step
            for key, p in params.items():
                g = grads[key]
                adam_m[key] = cfg.beta1 * adam_m[key] + (1.0 - cfg.beta1) * g
                adam_v[key] = cfg.beta2 * adam_v[key] + (1.0 - cfg.beta2) * g**2
                p -= cfg.learning_rate * (adam_m[key] / bias1) / (np.sqrt(adam_v[key] / bias2) + ADAM_EPS)

        val_loss = teacher_forced_loss(model, val_set)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(epoch, "non-finite validation loss")
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}
        elif epoch - best_epoch >= cfg.patience:
            break

    for key, p in params.items():
        p[...] = best_params[key]
    model.train_meta = {
        "best_epoch": best_epoch,
        "epochs_run": epochs_run,
        "best_val_loss": best_val,
        "n_windows": int(n),
        "seed": cfg.seed,
        "train_config": asdict(cfg),
    }
    return model


# ---------------------------------------------------------------------------
# Persistence: versioned JSON envelope, numbers as full-precision strings.
# ---------------------------------------------------------------------------


def _enc_array(arr: np.ndarray) -> dict:
    a = np.asarray(arr, dtype=np.float64)
    return {"shape": list(a.shape), "data": [repr(float(x)) for x in a.ravel(order="C")]}


def _dec_array(obj: dict, context: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in obj["shape"])
        data = np.array([float(x) for x in obj["data"]], dtype=np.float64)
        return data.reshape(shape, order="C")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"bad array field {context}: {exc}") from None


def _enc_points(points) -> list[list[str]]:
    return [[repr(float(p.lat_deg)), repr(float(p.lon_deg))] for p in points]


class LoadedModel(NamedTuple):
    model: EncoderDecoderModel
    profile: RouteProfile
    normalizer: Normalizer
    threshold: float | None


def save_model(
    path: str | Path,
    model: EncoderDecoderModel,
    profile: RouteProfile,
    normalizer: Normalizer,
    threshold: float | None = None,
) -> None:
    doc = {
        "version": MODEL_FILE_VERSION,
        "route_id": profile.route_id,
        "config": {
            "hidden_size": model.hidden_size,
            "window_len": model.window_len,
            "feature_dim": model.feature_dim,
            "reverse_reconstruction": model.reverse_reconstruction,
            "train_meta": model.train_meta,
        },
        "normalizer": {
            "mean": [repr(float(x)) for x in normalizer.mean],
            "std": [repr(float(x)) for x in normalizer.std],
        },
        "route_profile": {
            "route_id": profile.route_id,
            "major_points": _enc_points(profile.major_points),
            "major_fractions": [repr(float(f)) for f in profile.major_fractions],
            "avg_path": [[repr(float(lat)), repr(float(lon))] for lat, lon in profile.avg_path.samples],
        },
        "threshold": None if threshold is None else repr(float(threshold)),
        "encoder": {
            "w_x": _enc_array(model.encoder.w_x),
            "w_h": _enc_array(model.encoder.w_h),
            "b": _enc_array(model.encoder.b),
        },
        "decoder": {
            "w_x": _enc_array(model.decoder.w_x),
            "w_h": _enc_array(model.decoder.w_h),
            "b": _enc_array(model.decoder.b),
        },
        "projection": {"w": _enc_array(model.proj_w), "b": _enc_array(model.proj_b)},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LoadedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from None

    version = doc.get("version")
    if version != MODEL_FILE_VERSION:
        raise ModelVersionError(
            f"model file {path} has version {version!r}, this build reads version {MODEL_FILE_VERSION}"
        )
    try:
        cfg = doc["config"]
        encoder = LstmParams(
            _dec_array(doc["encoder"]["w_x"], "encoder.w_x"),
            _dec_array(doc["encoder"]["w_h"], "encoder.w_h"),
            _dec_array(doc["encoder"]["b"], "encoder.b"),
        )
        decoder = LstmParams(
            _dec_array(doc["decoder"]["w_x"], "decoder.w_x"),
            _dec_array(doc["decoder"]["w_h"], "decoder.w_h"),
            _dec_array(doc["decoder"]["b"], "decoder.b"),
        )
        model = EncoderDecoderModel(
            encoder=encoder,
            decoder=decoder,
            proj_w=_dec_array(doc["projection"]["w"], "projection.w"),
            proj_b=_dec_array(doc["projection"]["b"], "projection.b"),
            hidden_size=int(cfg["hidden_size"]),
            window_len=int(cfg["window_len"]),
            reverse_reconstruction=bool(cfg["reverse_reconstruction"]),
            train_meta=dict(cfg.get("train_meta", {})),
        )
        prof = doc["route_profile"]
        profile = RouteProfile(
            route_id=prof["route_id"],
            major_points=tuple(GeoPoint(float(lat), float(lon)) for lat, lon in prof["major_points"]),
            avg_path=AveragePath(
                samples=np.array([[float(lat), float(lon)] for lat, lon in prof["avg_path"]])
            ),
            major_fractions=tuple(float(f) for f in prof["major_fractions"]),
        )
        normalizer = Normalizer(
            mean=np.array([float(x) for x in doc["normalizer"]["mean"]]),
            std=np.array([float(x) for x in doc["normalizer"]["std"]]),
        )
        threshold = doc["threshold"]
        threshold = None if threshold is None else float(threshold)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"model file {path} is malformed: {exc}") from None
    return LoadedModel(model=model, profile=profile, normalizer=normalizer, threshold=threshold)
