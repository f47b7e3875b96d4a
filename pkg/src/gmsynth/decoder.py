"""Decoder network mapping a material vector to a preview image.

The input signal (length m, one channel) is widened by four blocks of
same-padded 1-D convolution (64 filters, kernel 3, stride 1) followed by
nearest-neighbor upsampling by 2, then flattened through a 1000-unit fully
connected layer into the res*res*3 output.  Exponential linear units
follow every trainable layer except the last, which stays linear; images
are clamped to [0, 1] only at the display boundary, the raw outputs feed
the mean-squared-error loss.

Everything here is hand-rolled numpy: forward, reverse-mode gradients, and
the Adam update (lr 1e-3, beta1 0.9, beta2 0.999, eps 1e-8, no decay).
Convolutions run as im2col matrix products so batches stay on the BLAS
fast path; parameters are float32 by default, while the gradient-check
tests cast a tiny network to float64.

With enough fresh rendered pairs the network cannot memorize per-image
noise, so training against unconverged noisy targets still converges to
smooth predictions; the test suite pins that denoising behavior down.
"""

import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from gmsynth.errors import DimensionMismatch, GmsError
from gmsynth.materials import MaterialParams
from gmsynth.render import ImageBuffer
from gmsynth.seeding import derive_rng

N_BLOCKS = 4
N_FILTERS = 64
KERNEL_SIZE = 3
FC_HIDDEN = 1000


@dataclass
class ConvLayer:
    weight: np.ndarray  # (out_channels, in_channels, kernel)
    bias: np.ndarray  # (out_channels,)


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out_features, in_features)
    bias: np.ndarray  # (out_features,)


@dataclass
class DecoderNetwork:
    """Layer stack plus the architecture constants it was built for."""

    m: int
    res: int
    convs: list
    fc1: DenseLayer
    fc2: DenseLayer

    @property
    def feature_length(self):
        # four upsamplings of factor 2
        return self.m * (2**N_BLOCKS)

    @property
    def parameter_count(self):
        total = 0
        for layer in self.layers():
            total += layer.weight.size + layer.bias.size
        return total

    def layers(self):
        return [*self.convs, self.fc1, self.fc2]

    def astype(self, dtype):
        return DecoderNetwork(
            m=self.m,
            res=self.res,
            convs=[ConvLayer(c.weight.astype(dtype), c.bias.astype(dtype)) for c in self.convs],
            fc1=DenseLayer(self.fc1.weight.astype(dtype), self.fc1.bias.astype(dtype)),
            fc2=DenseLayer(self.fc2.weight.astype(dtype), self.fc2.bias.astype(dtype)),
        )


def init_glorot(seed=0, m=19, res=32, dtype=np.float32, filters=N_FILTERS, hidden=FC_HIDDEN):
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.

    ``filters``/``hidden`` default to the real architecture; gradient-check
    tests shrink them so exhaustive finite differences stay affordable.
    """
    rng = derive_rng(seed, "decoder/init")

    def uniform(shape, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape).astype(dtype)

    convs = []
    in_ch = 1
    for _ in range(N_BLOCKS):
        w = uniform((filters, in_ch, KERNEL_SIZE), in_ch * KERNEL_SIZE, filters * KERNEL_SIZE)
        convs.append(ConvLayer(w, np.zeros(filters, dtype=dtype)))
        in_ch = filters
    flat = filters * m * (2**N_BLOCKS)
    fc1 = DenseLayer(uniform((hidden, flat), flat, hidden), np.zeros(hidden, dtype=dtype))
    out = res * res * 3
    fc2 = DenseLayer(uniform((out, hidden), hidden, out), np.zeros(out, dtype=dtype))
    return DecoderNetwork(m=m, res=res, convs=convs, fc1=fc1, fc2=fc2)


def _elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def _elu_grad(z, activated):
    # derivative is 1 for z > 0 and elu(z) + 1 below
    return np.where(z > 0, 1.0, activated + 1.0)


def _conv_patches(x, pad):
    """im2col for stride-1 same convolution: (B, Ci, L) -> (B, Ci*k, L)."""
    b, ci, length = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    cols = [xp[:, :, j : j + length] for j in range(2 * pad + 1)]
    return np.concatenate(cols, axis=1)


def _fold_weight(weight):
    # patches stack kernel-major, so flatten the weight the same way
    co, ci, k = weight.shape
    return weight.transpose(2, 1, 0).reshape(k * ci, co).T


def _conv_forward(layer, x):
    co, ci, k = layer.weight.shape
    b, _, length = x.shape
    patches = _conv_patches(x, (k - 1) // 2)
    w2 = _fold_weight(layer.weight)
    # one gemm over the whole batch: (co, k*ci) @ (k*ci, b*length)
    flat = patches.transpose(1, 0, 2).reshape(k * ci, b * length)
    out = (w2 @ flat).reshape(co, b, length).transpose(1, 0, 2)
    out = out + layer.bias[None, :, None]
    return out, patches


def _conv_backward(layer, patches, d_out):
    co, ci, k = layer.weight.shape
    b, _, length = d_out.shape
    w2 = _fold_weight(layer.weight)
    d_bias = d_out.sum(axis=(0, 2))
    d_flat = d_out.transpose(1, 0, 2).reshape(co, b * length)
    p_flat = patches.transpose(1, 0, 2).reshape(k * ci, b * length)
    d_w2 = d_flat @ p_flat.T
    d_weight = d_w2.T.reshape(k, ci, co).transpose(2, 1, 0)
    d_patches = (w2.T @ d_flat).reshape(k * ci, b, length).transpose(1, 0, 2)
    pad = (k - 1) // 2
    d_xp = np.zeros((b, ci, length + 2 * pad), dtype=d_out.dtype)
    for j in range(k):
        d_xp[:, :, j : j + length] += d_patches[:, j * ci : (j + 1) * ci, :]
    return d_xp[:, :, pad : pad + length], d_weight, d_bias


def forward_raw(net, xs, want_cache=False):
    """Raw (unclamped) outputs for a (B, m) batch; optionally the cache."""
    xs = np.atleast_2d(np.asarray(xs, dtype=net.fc1.weight.dtype))
    if xs.shape[1] != net.m:
        raise DimensionMismatch(f"decoder expects m={net.m}, got {xs.shape[1]}")
    a = xs[:, None, :]  # (B, 1, m)
    cache = {"conv": []}
    for layer in net.convs:
        z, patches = _conv_forward(layer, a)
        act = _elu(z)
        up = np.repeat(act, 2, axis=2)
        cache["conv"].append((patches, z, act))
        a = up
    b = a.shape[0]
    flat = a.reshape(b, -1)
    z1 = flat @ net.fc1.weight.T + net.fc1.bias
    a1 = _elu(z1)
    out = a1 @ net.fc2.weight.T + net.fc2.bias
    if want_cache:
        cache.update({"flat": flat, "flat_shape": a.shape, "z1": z1, "a1": a1})
        return out, cache
    return out


def forward(net, x):
    """Predict the preview image for one material, clamped for display."""
    v = x.values if isinstance(x, MaterialParams) else np.asarray(x, dtype=np.float64)
    out = forward_raw(net, v[None, :])
    img = np.clip(out[0].astype(np.float64), 0.0, 1.0)
    return ImageBuffer(img.reshape(net.res, net.res, 3))


@dataclass
class Gradients:
    convs: list  # of (d_weight, d_bias)
    fc1: tuple
    fc2: tuple

    def as_list(self):
        flat = []
        for dw, db in [*self.convs, self.fc1, self.fc2]:
            flat.extend([dw, db])
        return flat


def backward(net, xs, targets, reduction="mean"):
    """Loss and parameter gradients for a batch under squared error.

    ``reduction="mean"`` averages over every output value in the batch;
    ``"sum"`` leaves the plain sum of squares (gradients scale exactly by
    the element count between the two).
    """
    out, cache = forward_raw(net, xs, want_cache=True)
    targets = np.atleast_2d(np.asarray(targets, dtype=out.dtype))
    if targets.shape != out.shape:
        raise DimensionMismatch(f"target shape {targets.shape} != output {out.shape}")
    diff = out - targets
    if reduction == "mean":
        loss = float(np.mean(diff * diff))
        d_out = (2.0 / diff.size) * diff
    elif reduction == "sum":
        loss = float(np.sum(diff * diff))
        d_out = 2.0 * diff
    else:
        raise GmsError(f"unknown reduction {reduction!r}")

    d_fc2_w = d_out.T @ cache["a1"]
    d_fc2_b = d_out.sum(axis=0)
    d_a1 = d_out @ net.fc2.weight
    d_z1 = d_a1 * _elu_grad(cache["z1"], cache["a1"])
    d_fc1_w = d_z1.T @ cache["flat"]
    d_fc1_b = d_z1.sum(axis=0)
    d_flat = d_z1 @ net.fc1.weight

    d_a = d_flat.reshape(cache["flat_shape"])
    conv_grads = [None] * len(net.convs)
    for idx in range(len(net.convs) - 1, -1, -1):
        patches, z, act = cache["conv"][idx]
        d_act = d_a[:, :, 0::2] + d_a[:, :, 1::2]  # undo nearest upsampling
        d_z = d_act * _elu_grad(z, act)
        d_a, d_w, d_b = _conv_backward(net.convs[idx], patches, d_z)
        conv_grads[idx] = (d_w, d_b)
    return loss, Gradients(convs=conv_grads, fc1=(d_fc1_w, d_fc1_b), fc2=(d_fc2_w, d_fc2_b))


@dataclass
class TrainerState:
    """Adam moment accumulators, one pair per parameter tensor."""

    first: list
    second: list
    step: int = 0

    @classmethod
    def for_network(cls, net):
        params = _parameters(net)
        return cls(
            first=[np.zeros_like(p) for p in params],
            second=[np.zeros_like(p) for p in params],
        )


def _parameters(net):
    flat = []
    for layer in net.layers():
        flat.extend([layer.weight, layer.bias])
    return flat


def adam_update(net, state, grads, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam step, fused bias-correction form.

    Uses the identity m_hat/(sqrt(v_hat)+eps) = sqrt(bc2)/bc1 * m/(sqrt(v)
    + eps*sqrt(bc2)) to avoid materializing the bias-corrected moments.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    alpha_t = lr * np.sqrt(bc2) / bc1
    eps_t = eps * np.sqrt(bc2)
    for p, m, v, g in zip(_parameters(net), state.first, state.second, grads.as_list()):
        g = g.astype(p.dtype, copy=False)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        denom = np.sqrt(v)
        denom += eps_t
        update = np.divide(m, denom, out=denom)
        update *= alpha_t
        p -= update


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 20
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    validation_fraction: float = 0.05
    seed: int = 0


@dataclass
class TrainResult:
    network: DecoderNetwork
    train_history: list  # per-step training MSE
    val_history: list  # per-epoch validation MSE (empty without a split)


def _materialize(dataset):
    xs, ys = [], []
    for params, image in dataset:
        v = params.values if isinstance(params, MaterialParams) else np.asarray(params)
        xs.append(np.asarray(v, dtype=np.float32))
        pix = image.pixels if isinstance(image, ImageBuffer) else np.asarray(image)
        ys.append(np.asarray(pix, dtype=np.float32).reshape(-1))
    return np.stack(xs), np.stack(ys)


def train(net, dataset, config=None):
    """Stream the dataset through Adam for the configured number of epochs.

    The validation split is held out before the first step and never
    trained on.  Aborts on a non-finite loss.
    """
    config = config or TrainConfig()
    xs, ys = _materialize(dataset)
    n = xs.shape[0]
    split_rng = derive_rng(config.seed, "decoder/val-split")
    order = split_rng.permutation(n)
    val_count = min(int(np.floor(config.validation_fraction * n)), n - 1)
    val_idx, train_idx = order[:val_count], order[val_count:]

    state = TrainerState.for_network(net)
    shuffle_rng = derive_rng(config.seed, "decoder/shuffle")
    train_history, val_history = [], []
    for _ in range(config.epochs):
        epoch_order = train_idx[shuffle_rng.permutation(train_idx.size)]
        for start in range(0, epoch_order.size, config.batch_size):
            batch = epoch_order[start : start + config.batch_size]
            loss, grads = backward(net, xs[batch], ys[batch])
            if not np.isfinite(loss):
                raise GmsError(f"non-finite training loss at step {len(train_history)}")
            adam_update(net, state, grads, config.lr, config.beta1, config.beta2, config.eps)
            train_history.append(loss)
        if val_count:
            val_history.append(evaluate_mse(net, xs[val_idx], ys[val_idx], config.batch_size))
    return TrainResult(network=net, train_history=train_history, val_history=val_history)


def evaluate_mse(net, xs, ys, batch_size=64):
    total, count = 0.0, 0
    for start in range(0, xs.shape[0], batch_size):
        out = forward_raw(net, xs[start : start + batch_size])
        d = out - ys[start : start + batch_size]
        total += float(np.sum(d * d))
        count += d.size
    return total / count


def psnr(a, b):
    """Peak signal-to-noise ratio in dB with peak 1.0; inf when identical."""
    pa = a.pixels if isinstance(a, ImageBuffer) else np.asarray(a, dtype=np.float64)
    pb = b.pixels if isinstance(b, ImageBuffer) else np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise DimensionMismatch(f"image shapes differ: {pa.shape} vs {pb.shape}")
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


# ---------------------------------------------------------------------------
# Serialization: little-endian binary blob, magic "GMSN".

MAGIC = b"GMSN"
VERSION = 1
_KIND_CONV = 1
_KIND_DENSE = 2


def save_network(path, net):
    with open(path, "wb") as fh:
        fh.write(network_to_bytes(net))


def network_to_bytes(net):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<III", VERSION, net.m, net.res))
    layers = net.layers()
    buf.write(struct.pack("<I", len(layers)))
    for layer in layers:
        if isinstance(layer, ConvLayer):
            co, ci, k = layer.weight.shape
            buf.write(struct.pack("<BIII", _KIND_CONV, co, ci, k))
        else:
            out, inp = layer.weight.shape
            buf.write(struct.pack("<BII", _KIND_DENSE, out, inp))
    for layer in layers:
        buf.write(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
        buf.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    return buf.getvalue()


def load_network(path):
    with open(path, "rb") as fh:
        return network_from_bytes(fh.read())


def network_from_bytes(data):
    buf = io.BytesIO(data)
    if buf.read(4) != MAGIC:
        raise GmsError("not a decoder network blob (bad magic)")
    version, m, res = struct.unpack("<III", buf.read(12))
    if version != VERSION:
        raise GmsError(f"unsupported network blob version {version}")
    (layer_count,) = struct.unpack("<I", buf.read(4))
    shapes = []
    for _ in range(layer_count):
        (kind,) = struct.unpack("<B", buf.read(1))
        if kind == _KIND_CONV:
            shapes.append((kind, struct.unpack("<III", buf.read(12))))
        elif kind == _KIND_DENSE:
            shapes.append((kind, struct.unpack("<II", buf.read(8))))
        else:
            raise GmsError(f"unknown layer kind {kind}")

    def read_array(shape):
        count = int(np.prod(shape))
        arr = np.frombuffer(buf.read(count * 4), dtype="<f4").reshape(shape)
        return arr.copy()

    convs, dense = [], []
    for kind, shape in shapes:
        w = read_array(shape)
        b = read_array((shape[0],))
        if kind == _KIND_CONV:
            convs.append(ConvLayer(w, b))
        else:
            dense.append(DenseLayer(w, b))
    if len(dense) != 2:
        raise GmsError("expected exactly two dense layers in blob")
    return DecoderNetwork(m=m, res=res, convs=convs, fc1=dense[0], fc2=dense[1])


def history_to_csv(result):
    """Loss history as comma-separated text (step, train mse, val mse)."""
    lines = ["kind,index,mse"]
    for i, v in enumerate(result.train_history):
        lines.append(f"train,{i},{repr(float(v))}")
    for i, v in enumerate(result.val_history):
        lines.append(f"val,{i},{repr(float(v))}")
    return "\n".join(lines) + "\n"
