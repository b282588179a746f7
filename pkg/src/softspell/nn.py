"""Minimal reverse-mode autodiff for batched sequence tensors.

Everything is 64-bit: the gradient checks promise 1e-4 relative agreement
with central finite differences, which single precision cannot deliver.
Arrays are channels-last, (batch, length, channels), so convolutions lower
to a single GEMM on contiguous patches and reductions run over trailing
axes. The graph is a tape of closures; ``Tensor.backward`` walks it in
reverse topological order.

Backward closures return one gradient array per parent. The engine may
accumulate into those arrays in place, so a closure routing the same
buffer to several parents must copy all but one.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeMismatchError(ValueError):
    """Operands have incompatible shapes."""


class GraphNotRecordedError(RuntimeError):
    """backward() was called on a tensor with no recorded forward pass."""


class Tensor:
    """An array plus the closure that routes gradients to its parents."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every ancestor's ``grad``."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        if self._backward_fn is None and not self._parents:
            raise GraphNotRecordedError("no forward pass recorded for this tensor")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is None or node.grad is None:
                continue
            for parent, grad in zip(node._parents, node._backward_fn(node.grad)):
                if grad is None:
                    continue
                if parent.grad is None:
                    parent.grad = grad
                else:
                    parent.grad += grad


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    out._parents = parents
    out._backward_fn = backward_fn
    return out


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or bool(t._parents)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shaped tensors (used for skip connections)."""
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(f"add: {a.data.shape} vs {b.data.shape}")
    return _node(a.data + b.data, (a, b), lambda g: (g.copy(), g))


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Same-padded cross-correlation along the length axis.

    ``x`` is (batch, length, in_channels); ``weight`` is
    (kernel, in_channels, out_channels) with an odd kernel; ``bias`` is
    (out_channels,). Output is (batch, length, out_channels).
    """
    if x.data.ndim != 3:
        raise ShapeMismatchError(f"conv1d input must be 3-d, got {x.data.shape}")
    kernel, in_channels, out_channels = weight.data.shape
    if kernel % 2 != 1:
        raise ShapeMismatchError(f"kernel size must be odd, got {kernel}")
    batch, length, channels = x.data.shape
    if channels != in_channels:
        raise ShapeMismatchError(f"conv1d: input has {channels} channels, weight expects {in_channels}")
    if bias.data.shape != (out_channels,):
        raise ShapeMismatchError(f"conv1d: bias shape {bias.data.shape} != ({out_channels},)")
    pad = (kernel - 1) // 2
    flat_patches = _window_patches(x.data, kernel, pad)
    flat_weight = weight.data.reshape(kernel * in_channels, out_channels)
    out = flat_patches @ flat_weight
    out += bias.data
    out = out.reshape(batch, length, out_channels)
    need_x = _needs_grad(x)

    def backward(grad: np.ndarray):
        flat_grad = grad.reshape(batch * length, out_channels)
        grad_weight = (flat_patches.T @ flat_grad).reshape(kernel, in_channels, out_channels)
        grad_bias = flat_grad.sum(axis=0)
        if not need_x:
            return None, grad_weight, grad_bias
        if pad:
            # gradient w.r.t. the input is the same-padded correlation of the
            # output gradient with the kernel flipped and transposed
            flipped = np.ascontiguousarray(weight.data[::-1].transpose(0, 2, 1)).reshape(
                kernel * out_channels, in_channels
            )
            grad_x = (_window_patches(grad, kernel, pad) @ flipped).reshape(
                batch, length, in_channels
            )
        else:
            grad_x = (flat_grad @ flat_weight.T).reshape(batch, length, in_channels)
        return grad_x, grad_weight, grad_bias

    return _node(out, (x, weight, bias), backward)


def _window_patches(data: np.ndarray, kernel: int, pad: int) -> np.ndarray:
    """(batch*length, kernel*channels) sliding windows of a zero-padded array."""
    batch, length, channels = data.shape
    if not pad:
        return data.reshape(batch * length, channels)
    padded = np.empty((batch, length + 2 * pad, channels))
    padded[:, :pad, :] = 0.0
    padded[:, pad + length :, :] = 0.0
    padded[:, pad : pad + length, :] = data
    s0, s1, s2 = padded.strides
    windows = np.lib.stride_tricks.as_strided(
        padded, (batch, length, kernel, channels), (s0, s1, s1, s2)
    )
    return windows.reshape(batch * length, kernel * channels)


_allocator_tuned = False


def tune_allocator() -> None:
    """Raise glibc's mmap threshold so large temporaries recycle heap pages.

    The training loop allocates and frees megabyte-scale arrays thousands of
    times; with the default threshold every one is a fresh mmap plus page
    faults. No-op where glibc is unavailable.
    """
    global _allocator_tuned
    if _allocator_tuned:
        return
    _allocator_tuned = True
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 512 * 1024 * 1024)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 512 * 1024 * 1024)  # M_TRIM_THRESHOLD
    except (OSError, AttributeError):
        pass


_active_sign_trace: list[np.ndarray] | None = None


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    """Elementwise max(x, slope * x)."""
    positive = x.data >= 0
    if _active_sign_trace is not None:
        _active_sign_trace.append(positive)
    out = np.maximum(x.data, slope * x.data)
    factor = slope + (1.0 - slope) * positive
    return _node(out, (x,), lambda grad: (grad * factor,))


def softmax_columns(x: Tensor) -> Tensor:
    """Softmax over the channel axis (one distribution per sequence position)."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    np.exp(shifted, out=shifted)
    probs = shifted
    probs /= probs.sum(axis=-1, keepdims=True)

    def backward(grad: np.ndarray):
        inner = (grad * probs).sum(axis=-1, keepdims=True)
        out = grad - inner
        out *= probs
        return (out,)

    return _node(probs, (x,), backward)


def cross_entropy_columns(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over columns of -sum_i target_i * log(pred_i), clamped at 1e-12."""
    if pred.data.shape != target.data.shape:
        raise ShapeMismatchError(f"cross entropy: {pred.data.shape} vs {target.data.shape}")
    n_columns = pred.data.size // pred.data.shape[-1]
    safe = np.maximum(pred.data, 1e-12)
    loss = -(target.data * np.log(safe)).sum() / n_columns

    def backward(grad: np.ndarray):
        scale = -float(grad) / n_columns
        grad_pred = scale * target.data / safe
        grad_pred[pred.data < 1e-12] = 0.0
        return grad_pred, None

    return _node(np.float64(loss), (pred, target), backward)


def softmax_cross_entropy(logits: Tensor, target: Tensor) -> tuple[Tensor, np.ndarray]:
    """Fused column softmax + one-hot cross-entropy.

    Returns the scalar loss tensor and the softmax probabilities. Values and
    gradients equal cross_entropy_columns(softmax_columns(logits), target),
    but the log runs only over the true-class entries, so the hot training
    loop avoids two full-tensor passes. Target columns must be one-hot.
    """
    if logits.data.shape != target.data.shape:
        raise ShapeMismatchError(f"softmax_cross_entropy: {logits.data.shape} vs {target.data.shape}")
    channels = logits.data.shape[-1]
    n_columns = logits.data.size // channels
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    np.exp(shifted, out=shifted)
    probs = shifted
    probs /= probs.sum(axis=-1, keepdims=True)
    flat_probs = probs.reshape(n_columns, channels)
    true_idx = target.data.reshape(n_columns, channels).argmax(axis=1)
    true_probs = flat_probs[np.arange(n_columns), true_idx]
    loss = -np.log(np.maximum(true_probs, 1e-12)).sum() / n_columns

    def backward(grad: np.ndarray):
        grad_logits = probs - target.data
        grad_logits *= float(grad) / n_columns
        return grad_logits, None

    return _node(np.float64(loss), (logits, target), backward), probs


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over all entries (quadratic in pred, handy for checks)."""
    if pred.data.shape != target.data.shape:
        raise ShapeMismatchError(f"mse: {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    loss = (diff * diff).mean()
    return _node(np.float64(loss), (pred, target), lambda g: (float(g) * 2.0 * diff / diff.size, None))


class BatchNorm:
    """Per-channel batch normalization over (batch, length) positions.

    Training mode normalizes with biased batch statistics and updates the
    running statistics with the unbiased variance; inference mode
    normalizes with the running statistics and is deterministic.
    """

    def __init__(self, channels: int, epsilon: float = 1e-5, momentum: float = 0.1):
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.epsilon = epsilon
        self.momentum = momentum
        self.channels = channels

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        if x.data.ndim != 3 or x.data.shape[2] != self.channels:
            raise ShapeMismatchError(
                f"batchnorm expects (batch, length, {self.channels}), got {x.data.shape}"
            )
        gamma, beta = self.gamma, self.beta
        if training:
            n = x.data.shape[0] * x.data.shape[1]
            mean = x.data.mean(axis=(0, 1))
            x_hat = x.data - mean
            var = np.einsum("blc,blc->c", x_hat, x_hat) / n
            inv_std = 1.0 / np.sqrt(var + self.epsilon)
            x_hat *= inv_std
            correction = n / (n - 1) if n > 1 else 1.0
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var * correction

            def backward(grad: np.ndarray):
                grad_gamma = np.einsum("blc,blc->c", grad, x_hat)
                grad_beta = grad.sum(axis=(0, 1))
                # d/dx of ((x - mean(x)) / std(x)) * gamma, batch stats included
                grad_x = grad * (n * gamma.data)
                grad_x -= gamma.data * grad_beta
                grad_x -= x_hat * (gamma.data * grad_gamma)
                grad_x *= inv_std / n
                return grad_x, grad_gamma, grad_beta

        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.epsilon)
            x_hat = (x.data - self.running_mean) * inv_std

            def backward(grad: np.ndarray):
                grad_gamma = np.einsum("blc,blc->c", grad, x_hat)
                grad_beta = grad.sum(axis=(0, 1))
                grad_x = grad * (gamma.data * inv_std)
                return grad_x, grad_gamma, grad_beta

        out = x_hat * gamma.data
        out += beta.data
        return _node(out, (x, gamma, beta), backward)


class Adam:
    """Standard Adam with bias correction; one state slot per parameter."""

    def __init__(
        self,
        params: Sequence[Tensor],
        learning_rate: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for i, p in enumerate(self.params):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1 - self.beta1) * grad
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1 - self.beta2) * grad * grad
            m_hat = self.first_moment[i] / bias1
            v_hat = self.second_moment[i] / bias2
            p.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def _traced_loss(loss_fn: Callable[[], Tensor]) -> tuple[float, list[np.ndarray]]:
    global _active_sign_trace
    _active_sign_trace = []
    try:
        value = float(loss_fn().data)
        return value, _active_sign_trace
    finally:
        _active_sign_trace = None


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    rng: np.random.Generator,
    eps: float = 1e-5,
    fraction: float = 0.01,
) -> float:
    """Max relative error between analytic gradients and central differences.

    Samples ``fraction`` of each parameter tensor (at least one entry per
    tensor). ``loss_fn`` must be deterministic: run batchnorm in inference
    mode or keep the batch fixed so statistics are a pure function of it.

    A central difference only estimates the derivative where the loss is
    smooth on the whole probe interval, and only to the resolution double
    precision allows, so two kinds of probe are invalid and are resampled:

    - kink probes, where the two perturbed evaluations disagree on some
      LeakyReLU activation sign (the secant straddles a nondifferentiable
      point and measures a slope mixture, whatever the implementation);
    - unresolvable probes, where both gradients are smaller than about
      1e5 times the quantization step of the loss difference, so the
      comparison would measure float64 rounding rather than the gradient.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, reference in zip(params, analytic):
        flat = p.data.reshape(-1)
        flat_ref = reference.reshape(-1)
        n_pick = min(flat.size, max(1, int(round(fraction * flat.size))))
        candidates = list(rng.permutation(flat.size))
        checked = 0
        while checked < n_pick and candidates:
            idx = candidates.pop()
            original = flat[idx]
            flat[idx] = original + eps
            loss_plus, pattern_plus = _traced_loss(loss_fn)
            flat[idx] = original - eps
            loss_minus, pattern_minus = _traced_loss(loss_fn)
            flat[idx] = original
            if not all(
                np.array_equal(a, b) for a, b in zip(pattern_plus, pattern_minus)
            ):
                continue  # kink probe
            finite_diff = (loss_plus - loss_minus) / (2 * eps)
            resolution = np.spacing(max(abs(loss_plus), abs(loss_minus), 1.0)) / (2 * eps)
            if max(abs(flat_ref[idx]), abs(finite_diff)) < 1e5 * resolution:
                continue  # unresolvable probe
            checked += 1
            rel = abs(flat_ref[idx] - finite_diff) / max(abs(flat_ref[idx]), abs(finite_diff), 1e-8)
            worst = max(worst, rel)
    return worst
