"""Dense numeric kernels the layers are built from.

Arrays are plain numpy ndarrays, row-major, rank <= 3. Training and
inference run in float32; gradient checking runs the same code in float64.
No sparse storage: spikes are kept dense and sparsity is accounted for
analytically by the energy module.
"""

import numpy as np

from .errors import ConfigError, DimensionError, NumericError


def require_finite(arr, what="array"):
    """Reject NaN/Inf. Used on external inputs and in checked code paths."""
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{what} contains non-finite values")


def conv1d_same(x, kernels, bias, padding=2, stride=1):
    """Sequence convolution with zero padding.

    x:       (B, R, Cin)
    kernels: (Cout, Cin, K)
    bias:    (Cout,)
    returns  (B, R', Cout) with R' = (R + 2*padding - K)//stride + 1;
    out[i,j,k] = sum_{l,m} x[i, j*stride+m-padding, l] * kernels[k,l,m] + bias[k],
    out-of-range taps read as zero. K=5, padding=2, stride=1 preserves R.
    """
    x = np.asarray(x)
    kernels = np.asarray(kernels)
    bias = np.asarray(bias)
    if x.ndim != 3 or kernels.ndim != 3:
        raise DimensionError(
            f"conv1d_same expects rank-3 input and kernels, got {x.ndim} and {kernels.ndim}"
        )
    b, r, cin = x.shape
    cout, k_cin, k = kernels.shape
    if k_cin != cin:
        raise DimensionError(f"kernel input channels {k_cin} != input channels {cin}")
    if bias.shape != (cout,):
        raise DimensionError(f"bias shape {bias.shape} != ({cout},)")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if padding < 0:
        raise ConfigError(f"padding must be >= 0, got {padding}")
    if padding >= k:
        raise ConfigError(f"padding {padding} must be < kernel size {k}")
    if k > r + 2 * padding:
        raise DimensionError(f"kernel size {k} exceeds padded length {r + 2 * padding}")

    r_out = (r + 2 * padding - k) // stride + 1
    if padding:
        xp = np.zeros((b, r + 2 * padding, cin), dtype=x.dtype)
        xp[:, padding : padding + r, :] = x
    else:
        xp = x
    out = np.zeros((b, r_out, cout), dtype=x.dtype)
    # one (B*R')x(Cin) @ (Cin)x(Cout) product per kernel tap
    for m in range(k):
        seg = xp[:, m : m + (r_out - 1) * stride + 1 : stride, :]
        out += seg @ kernels[:, :, m].T
    out += bias
    return out


def conv1d_same_input_grad(d_out, kernels, r, padding=2, stride=1):
    """Adjoint of conv1d_same with respect to its input.

    d_out: (B, R', Cout) upstream gradient; returns (B, R, Cin).
    """
    b, r_out, cout = d_out.shape
    _, cin, k = kernels.shape
    dxp = np.zeros((b, r + 2 * padding, cin), dtype=d_out.dtype)
    for m in range(k):
        dxp[:, m : m + (r_out - 1) * stride + 1 : stride, :] += d_out @ kernels[:, :, m]
    return dxp[:, padding : padding + r, :]


def conv1d_same_kernel_grad(x, d_out, k, padding=2, stride=1):
    """Adjoint of conv1d_same with respect to the kernels.

    x: (B, R, Cin) forward input; d_out: (B, R', Cout); returns (Cout, Cin, K).
    """
    b, r, cin = x.shape
    _, r_out, cout = d_out.shape
    if padding:
        xp = np.zeros((b, r + 2 * padding, cin), dtype=x.dtype)
        xp[:, padding : padding + r, :] = x
    else:
        xp = x
    d_k = np.zeros((cout, cin, k), dtype=d_out.dtype)
    for m in range(k):
        seg = xp[:, m : m + (r_out - 1) * stride + 1 : stride, :]
        # (Cout, B*R') @ (B*R', Cin)
        d_k[:, :, m] = np.tensordot(d_out, seg, axes=([0, 1], [0, 1]))
    return d_k


def affine(x, weight, bias):
    """out[u] = sum_v weight[u,v] * x[v] + bias[u]."""
    x = np.asarray(x)
    weight = np.asarray(weight)
    bias = np.asarray(bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        raise DimensionError(
            f"affine shapes incompatible: x {x.shape}, weight {weight.shape}, bias {bias.shape}"
        )
    return x @ weight.T + bias


def softmax(logits, axis=-1):
    """Shift-invariant softmax along `axis`; outputs are positive and sum to 1."""
    logits = np.asarray(logits)
    require_finite(logits, "softmax input")
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)
