"""Minimal dense-tensor CNN: exact forward/backward passes and plain SGD.

Everything is float64 numpy in NHWC layout. Convolution and pooling use no
padding; the gene's stride applies to both spatial axes. Hidden layers apply
ReLU after their affine map; the classifier head is a raw linear layer read
through softmax cross-entropy. Just enough machinery to train the small
evolved networks on desk-scale data.
"""

import json

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .encoding import ConvLayer, FullyConnectedLayer, PoolLayer, PoolType
from .exceptions import TrainingDiverged


def relu(x):
    return np.maximum(x, 0.0)


def softmax(logits):
    """Row-wise stabilized softmax; accepts a single row or a batch."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_xent(logits, labels):
    """Mean cross-entropy loss and its gradient w.r.t. the logits.

    ``logits`` is (n, classes) or (classes,); ``labels`` holds integer class
    ids. The gradient is (softmax - onehot) / n, matching the mean loss.
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n = logits.shape[0]
    z = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    loss = float(-np.mean(log_probs[np.arange(n), labels]))
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad if n > 1 else grad[0]


def _windows(x, size, stride):
    # (N, oh, ow, C, size, size) view over all valid positions
    view = sliding_window_view(x, (size, size), axis=(1, 2))
    return view[:, ::stride, ::stride]


def _param_array(values):
    """float64 unless the caller already chose a float precision."""
    arr = np.asarray(values)
    return arr if arr.dtype in (np.float32, np.float64) else arr.astype(np.float64)


class Conv:
    """Valid convolution + bias + ReLU. Kernels are (out_c, f, f, in_c)."""

    kind = "conv"

    def __init__(self, kernels, bias, stride):
        self.kernels = _param_array(kernels)
        self.bias = _param_array(bias).astype(self.kernels.dtype, copy=False)
        self.stride = int(stride)
        self._cache = None
        self.grads = None

    def forward(self, x):
        out_c, f = self.kernels.shape[0], self.kernels.shape[1]
        cols = _windows(x, f, self.stride)  # (N, oh, ow, C, f, f)
        n, oh, ow = cols.shape[:3]
        cols = cols.reshape(n * oh * ow, -1)  # axis order (C, f, f), copies
        w = self.kernels.transpose(0, 3, 1, 2).reshape(out_c, -1)
        pre = cols @ w.T + self.bias
        mask = pre > 0.0
        self._cache = (x.shape, cols, w, mask, oh, ow)
        return (pre * mask).reshape(n, oh, ow, out_c)

    def backward(self, dout):
        x_shape, cols, w, mask, oh, ow = self._cache
        out_c, f = self.kernels.shape[0], self.kernels.shape[1]
        n = x_shape[0]
        dpre = dout.reshape(n * oh * ow, out_c) * mask
        d_bias = dpre.sum(axis=0)
        d_w = dpre.T @ cols
        d_kernels = d_w.reshape(out_c, x_shape[3], f, f).transpose(0, 2, 3, 1)
        dcols = (dpre @ w).reshape(n, oh, ow, x_shape[3], f, f)
        dx = np.zeros(x_shape, dtype=dpre.dtype)
        s = self.stride
        for i in range(f):
            for j in range(f):
                dx[:, i:i + s * oh:s, j:j + s * ow:s, :] += dcols[:, :, :, :, i, j]
        self.grads = [d_kernels, d_bias]
        return dx

    def params(self):
        return [self.kernels, self.bias]

    def out_shape(self, in_shape):
        h, w, _ = in_shape
        f, s = self.kernels.shape[1], self.stride
        return ((h - f) // s + 1, (w - f) // s + 1, self.kernels.shape[0])


class Pool:
    """Max or average pooling over each channel independently."""

    kind = "pool"

    def __init__(self, kernel, stride, mode):
        if mode not in ("max", "avg"):
            raise ValueError(f"unknown pooling mode {mode!r}")
        self.kernel = int(kernel)
        self.stride = int(stride)
        self.mode = mode
        self._cache = None
        self.grads = None

    def forward(self, x):
        k = self.kernel
        win = _windows(x, k, self.stride)  # (N, oh, ow, C, k, k)
        n, oh, ow, c = win.shape[:4]
        flat = win.reshape(n, oh, ow, c, k * k)
        if self.mode == "max":
            arg = flat.argmax(axis=-1)
            out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
            self._cache = (x.shape, arg, oh, ow)
        else:
            out = flat.mean(axis=-1)
            self._cache = (x.shape, None, oh, ow)
        return out

    def backward(self, dout):
        x_shape, arg, oh, ow = self._cache
        k, s = self.kernel, self.stride
        dx = np.zeros(x_shape, dtype=dout.dtype)
        if self.mode == "max":
            for t in range(k * k):
                contribution = dout * (arg == t)
                dx[:, t // k:t // k + s * oh:s, t % k:t % k + s * ow:s, :] += contribution
        else:
            share = dout / (k * k)
            for t in range(k * k):
                dx[:, t // k:t // k + s * oh:s, t % k:t % k + s * ow:s, :] += share
        self.grads = []
        return dx

    def params(self):
        return []

    def out_shape(self, in_shape):
        h, w, c = in_shape
        k, s = self.kernel, self.stride
        return ((h - k) // s + 1, (w - k) // s + 1, c)


class Dense:
    """Affine map on the flattened input; ReLU unless it is the output head.

    Weights are (out, in): row i holds the incoming weights of output unit i.
    """

    kind = "dense"

    def __init__(self, weights, bias, activation=True):
        self.weights = _param_array(weights)
        self.bias = _param_array(bias).astype(self.weights.dtype, copy=False)
        self.activation = bool(activation)
        self._cache = None
        self.grads = None

    def forward(self, x):
        x2 = x.reshape(x.shape[0], -1)
        pre = x2 @ self.weights.T + self.bias
        mask = pre > 0.0 if self.activation else None
        self._cache = (x.shape, x2, mask)
        return pre * mask if self.activation else pre

    def backward(self, dout):
        x_shape, x2, mask = self._cache
        dpre = dout * mask if self.activation else dout
        self.grads = [dpre.T @ x2, dpre.sum(axis=0)]
        return (dpre @ self.weights).reshape(x_shape)

    def params(self):
        return [self.weights, self.bias]

    def out_shape(self, in_shape):
        return (self.weights.shape[0],)


def conv_forward(x, kernels, bias, stride):
    """Convolution + bias + ReLU on a batch; returns the activation only."""
    return Conv(kernels, bias, stride).forward(np.asarray(x, dtype=np.float64))


def pool_forward(x, kernel, stride, mode):
    """Max/average pooling on a batch; mode is "max" or "avg"."""
    return Pool(kernel, stride, mode).forward(np.asarray(x, dtype=np.float64))


def fc_forward(x, weights, bias, activation=True):
    """Affine map (+ ReLU for hidden layers) on flattened inputs."""
    return Dense(weights, bias, activation).forward(np.asarray(x, dtype=np.float64))


class Network:
    """An ordered layer stack ending in a raw-logit classifier head."""

    def __init__(self, layers, input_shape):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        params = self.params()
        self.dtype = params[0].dtype if params else np.dtype(np.float64)

    def forward(self, x):
        out = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def shape_trace(self):
        """Per-layer output shapes, input shape first."""
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.out_shape(shapes[-1]))
        return shapes

    def params(self):
        return [p for layer in self.layers for p in layer.params()]


def backward(network, loss_grad):
    """Backpropagate through a freshly forwarded network; returns all grads."""
    grad = loss_grad if loss_grad.ndim > 1 else loss_grad[None, :]
    for layer in reversed(network.layers):
        grad = layer.backward(grad)
    return [g for layer in network.layers for g in layer.grads]


def sgd_step(network, grads, lr):
    """In-place p <- p - lr * g over every parameter."""
    for p, g in zip(network.params(), grads):
        p -= lr * g


def build_network(genes, input_shape, classes, rng, dtype=np.float64):
    """Instantiate a network from decoded layer genes plus the fixed head.

    Weights draw from a zero-mean Gaussian with std 1/sqrt(fan_in); biases
    start at zero. The output layer (``classes`` raw logits) is appended
    here; it is never part of the genome. ``dtype`` selects the training
    precision (float64 default; float32 halves time and memory).
    """
    dtype = np.dtype(dtype)
    layers = []
    shape = tuple(input_shape)
    flattened = False
    for gene in genes:
        if isinstance(gene, ConvLayer):
            if flattened:
                raise ValueError("convolution after flatten")
            h, w, c = shape
            f = gene.filter_size
            if f > h or f > w:
                raise ValueError(f"filter {f} exceeds input {h}x{w}")
            fan_in = f * f * c
            kernels = rng.normal(0.0, 1.0 / np.sqrt(fan_in),
                                 size=(gene.feature_maps, f, f, c))
            layer = Conv(kernels.astype(dtype), np.zeros(gene.feature_maps, dtype),
                         gene.stride)
        elif isinstance(gene, PoolLayer):
            if flattened:
                raise ValueError("pooling after flatten")
            h, w, _ = shape
            if gene.kernel_size > h or gene.kernel_size > w:
                raise ValueError(f"pool kernel {gene.kernel_size} exceeds input {h}x{w}")
            mode = "max" if gene.pool_type == PoolType.MAX else "avg"
            layer = Pool(gene.kernel_size, gene.stride, mode)
        elif isinstance(gene, FullyConnectedLayer):
            fan_in = int(np.prod(shape))
            weights = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(gene.neurons, fan_in))
            layer = Dense(weights.astype(dtype), np.zeros(gene.neurons, dtype),
                          activation=True)
            flattened = True
        else:
            raise TypeError(f"not a layer gene: {gene!r}")
        layers.append(layer)
        shape = layer.out_shape(shape)

    fan_in = int(np.prod(shape))
    head = Dense(rng.normal(0.0, 1.0 / np.sqrt(fan_in),
                            size=(classes, fan_in)).astype(dtype),
                 np.zeros(classes, dtype), activation=False)
    layers.append(head)
    return Network(layers, input_shape)


def train(network, images, labels, epochs, batch_size, lr, rng):
    """Plain SGD over shuffled mini-batches; raises on non-finite loss."""
    n = len(images)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            logits = network.forward(images[idx])
            loss, dlogits = softmax_xent(logits, labels[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss}")
            dlogits = dlogits.astype(network.dtype, copy=False)
            sgd_step(network, backward(network, dlogits), lr)
    return network


def accuracy(network, images, labels, batch_size=256):
    """Fraction of argmax-correct predictions."""
    hits = 0
    for start in range(0, len(images), batch_size):
        logits = network.forward(images[start:start + batch_size])
        hits += int(np.sum(np.argmax(logits, axis=1) == labels[start:start + batch_size]))
    return hits / len(images)


def save_checkpoint(network, path):
    """Debug checkpoint: one JSON header line, then raw little-endian float64."""
    header = {"input_shape": list(network.input_shape), "layers": []}
    for layer in network.layers:
        if layer.kind == "conv":
            header["layers"].append({"kind": "conv", "stride": layer.stride,
                                     "kernels": list(layer.kernels.shape)})
        elif layer.kind == "pool":
            header["layers"].append({"kind": "pool", "kernel": layer.kernel,
                                     "stride": layer.stride, "mode": layer.mode})
        else:
            header["layers"].append({"kind": "dense", "activation": layer.activation,
                                     "weights": list(layer.weights.shape)})
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        for p in network.params():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        blob = fh.read()
    layers = []
    offset = 0

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8
        return arr.copy()

    for entry in header["layers"]:
        if entry["kind"] == "conv":
            kernels = take(entry["kernels"])
            layers.append(Conv(kernels, take((entry["kernels"][0],)), entry["stride"]))
        elif entry["kind"] == "pool":
            layers.append(Pool(entry["kernel"], entry["stride"], entry["mode"]))
        else:
            weights = take(entry["weights"])
            layers.append(Dense(weights, take((entry["weights"][0],)), entry["activation"]))
    return Network(layers, tuple(header["input_shape"]))
