"""Loss, the hand-derived spatio-temporal backward pass, optimizers, the
training loop, and finite-difference gradient verification.

The backward pass propagates adjoints both across layers and backwards
through time. Per spiking layer, with G the surrogate spike derivative and
future adjoints zero at t = T:

    dL/dspk_t  = (from the consuming layer's transposed conv / affine)
    dL/dv_t    = G(v_t) * dL/dspk_t + w_vd * (1 - |spk_t|) * dL/dv_{t+1}
    dL/disc_t  = dL/dv_t + w_scd * dL/disc_{t+1}

Parameter gradients accumulate over t: kernels/bias correlate the layer's
input with dL/disc_t; the decay weights take isc_{t-1} * dL/disc_t and
v_{t-1} * (1 - |spk_{t-1}|) * dL/dv_t. The |spk| reset indicators are
constants in hard-spike mode (their derivative is zero almost everywhere);
in soft-spike mode the reset factor varies smoothly with v, so the backward
pass adds the corresponding chain term to stay the exact adjoint of the
soft forward that the finite-difference check differentiates.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NumericError
from .layers import ENCODING, NetworkConfig, forward, init_network
from .neuron import BINARY, TERNARY, spike_grad
from .tensorops import conv1d_same_input_grad, conv1d_same_kernel_grad

PROB_FLOOR_32 = 1e-12


@dataclass
class TrainConfig:
    batch_size: int = 8
    learning_rate: float = 1e-4
    epochs: int = 50
    seed: int = 0
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        return self


def named_parameters(net):
    """Flat ordered view of every trainable array, keyed '<layer>.<field>'."""
    params = {}
    for i, layer in enumerate(net):
        params[f"{i}.kernels"] = layer.kernels
        params[f"{i}.bias"] = layer.bias
        if layer.neuron is not None:
            params[f"{i}.w_scd"] = layer.neuron.w_scd
            params[f"{i}.w_vd"] = layer.neuron.w_vd
            if layer.neuron.w_fv_pos is not None:
                params[f"{i}.w_fv_pos"] = layer.neuron.w_fv_pos
                params[f"{i}.w_fv_neg"] = layer.neuron.w_fv_neg
    return params


def zero_gradients(net):
    return {name: np.zeros_like(p) for name, p in named_parameters(net).items()}


def token_weights(labels, mask):
    """Per-token loss weights: mask / (N * tokens-in-sentence)."""
    mask = np.asarray(mask)
    if mask.shape != labels.shape:
        raise DimensionError(f"mask shape {mask.shape} != labels shape {labels.shape}")
    n = labels.shape[0]
    row_tokens = mask.sum(axis=1, keepdims=True)
    safe = np.maximum(row_tokens, 1.0)
    return mask / (n * safe)


def cross_entropy(prob_class, labels, mask, prob_scale=None):
    """Mean over examples of the per-sentence mean token cross-entropy.

    prob_class entries are unnormalized timestep-summed softmax scores, so
    values above 1 are legal (they contribute negative terms). Masked tokens
    contribute zero. prob_scale optionally divides the scores first (used by
    the /T-normalization regression test). In float32, scores at a labeled
    class are floored at 1e-12 before the log.
    """
    prob_class = np.asarray(prob_class)
    labels = np.asarray(labels, dtype=np.int64)
    w = token_weights(labels, mask).astype(prob_class.dtype)
    p_true = np.take_along_axis(prob_class, labels[:, :, None], axis=2)[:, :, 0]
    if prob_scale is not None:
        p_true = p_true / prob_scale
    if prob_class.dtype == np.float32:
        p_true = np.maximum(p_true, PROB_FLOOR_32)
    elif np.any((p_true <= 0) & (w > 0)):
        raise NumericError("zero probability at a labeled class")
    return float(-(w * np.log(p_true)).sum())


def _prob_adjoint(trace, labels, mask, prob_scale):
    """dL/dprob_class for the masked mean cross-entropy."""
    prob = trace.prob_class
    labels = np.asarray(labels, dtype=np.int64)
    w = token_weights(labels, mask).astype(prob.dtype)
    g = np.zeros_like(prob)
    p_true = np.take_along_axis(prob, labels[:, :, None], axis=2)[:, :, 0]
    if prob.dtype == np.float32:
        p_safe = np.maximum(p_true, PROB_FLOOR_32)
    else:
        if np.any((p_true <= 0) & (w > 0)):
            raise NumericError("zero probability at a labeled class")
        p_safe = p_true
    if prob_scale is not None:
        # same float path as the scaled loss: d(-log(p/s))/dp = -(1/(p/s)) * (1/s)
        d = -w / (p_safe / prob_scale) / prob_scale
    else:
        d = -w / p_safe
    if prob.dtype == np.float32:
        # tokens sitting on the floor got a clipped loss; the clip has zero slope
        d = np.where(p_true < PROB_FLOOR_32, 0.0, d)
    np.put_along_axis(g, labels[:, :, None], d[:, :, None], axis=2)
    return g


def backward(trace, labels, mask, net, cfg: NetworkConfig, prob_scale=None,
             mutate=None):
    """Gradients of the batch loss for every trainable parameter.

    trace must come from forward() on the same batch and parameters. The
    `mutate` switch deliberately corrupts one named term so tests can prove
    the finite-difference check catches a wrong formula; it is never set in
    production paths.
    """
    if trace.prob_class is None or len(trace.probs_t) != cfg.time_steps:
        raise ConfigError("trace does not match the configured time_steps")
    spiking = net[:-1]
    out_layer = net[-1]
    if len(trace.spk) != len(spiking):
        raise ConfigError("trace does not match the network depth")
    mode = cfg.spike_mode
    soft = trace.soft
    t_steps = cfg.time_steps
    mask_col = None if trace.mask is None else trace.mask[:, :, None]

    grads = zero_gradients(net)
    g_prob = _prob_adjoint(trace, labels, mask, prob_scale)

    # output decoder: each timestep's softmax feeds prob_class additively
    last = len(spiking) - 1
    d_spk_ext = [[None] * t_steps for _ in spiking]
    w_out = out_layer.kernels
    for t in range(t_steps):
        p = trace.probs_t[t]
        d_logits = p * (g_prob - (g_prob * p).sum(axis=-1, keepdims=True))
        spk_in = trace.spk[last][t] if mask_col is None else trace.spk[last][t] * mask_col
        grads[f"{len(net) - 1}.kernels"] += np.tensordot(
            d_logits, spk_in, axes=([0, 1], [0, 1])
        )
        grads[f"{len(net) - 1}.bias"] += d_logits.sum(axis=(0, 1))
        d_masked = d_logits @ w_out
        d_spk_ext[last][t] = d_masked if mask_col is None else d_masked * mask_col

    # spiking layers, deepest first, each unrolled backwards through time
    for li in range(len(spiking) - 1, -1, -1):
        layer = spiking[li]
        neuron = layer.neuron
        is_enc = layer.kind == ENCODING
        r = trace.embeddings.shape[1]
        k = layer.kernels.shape[2]
        d_v_next = None
        d_isc_next = None

        for t in range(t_steps - 1, -1, -1):
            spk_t = trace.spk[li][t]
            v_t = trace.v[li][t]
            d_spk = d_spk_ext[li][t]
            if d_spk is None:
                d_spk = np.zeros_like(v_t)
            if soft and d_v_next is not None:
                # reset factor (1 - |spk_t|) varies smoothly with v in soft mode
                d_spk = d_spk - neuron.w_vd * v_t * np.sign(spk_t) * d_v_next
            g_surr = spike_grad(v_t, mode, cfg.alpha, neuron.v_thr,
                                cfg.surrogate_centering)
            d_v = g_surr * d_spk
            if d_v_next is not None:
                reset = 1.0 - np.abs(spk_t)
                if mutate == "drop_reset_factor":
                    reset = np.ones_like(reset)
                d_v = d_v + neuron.w_vd * reset * d_v_next

            if mutate == "isc_subscript_off_by_one":
                # the temporal-current recursion seeded from dL/dv_{t+1}
                d_isc = np.zeros_like(d_v) if d_v_next is None else d_v_next
            else:
                d_isc = d_v
            if d_isc_next is not None:
                d_isc = d_isc + neuron.w_scd * d_isc_next

            if t > 0:
                prev_isc = trace.isc[li][t - 1]
                prev_v = trace.v[li][t - 1]
                prev_spk = trace.spk[li][t - 1]
                grads[f"{li}.w_scd"] += (prev_isc * d_isc).sum(axis=(0, 1))
                grads[f"{li}.w_vd"] += (
                    prev_v * (1.0 - np.abs(prev_spk)) * d_v
                ).sum(axis=(0, 1))

            # drive_t enters isc_t with unit weight
            d_drive = d_isc
            grads[f"{li}.bias"] += d_drive.sum(axis=(0, 1))
            if is_enc:
                x_in = trace.embeddings
                grads[f"{li}.kernels"] += conv1d_same_kernel_grad(
                    x_in, d_drive, k, padding=cfg.padding
                )
            else:
                raw_prev = trace.spk[li - 1][t]
                x_in = raw_prev if mask_col is None else raw_prev * mask_col
                if mode == BINARY:
                    wspk = neuron.w_fv_pos * x_in
                else:
                    pos = np.maximum(x_in, 0.0)
                    neg = np.minimum(x_in, 0.0)
                    wspk = neuron.w_fv_pos * pos + neuron.w_fv_neg * neg
                grads[f"{li}.kernels"] += conv1d_same_kernel_grad(
                    wspk, d_drive, k, padding=cfg.padding
                )
                d_wspk = conv1d_same_input_grad(
                    d_drive, layer.kernels, r, padding=cfg.padding
                )
                if mode == BINARY:
                    grads[f"{li}.w_fv_pos"] += (x_in * d_wspk).sum()
                    d_x = neuron.w_fv_pos * d_wspk
                else:
                    grads[f"{li}.w_fv_pos"] += (pos * d_wspk).sum()
                    grads[f"{li}.w_fv_neg"] += (neg * d_wspk).sum()
                    d_x = (
                        neuron.w_fv_pos * (x_in > 0) + neuron.w_fv_neg * (x_in < 0)
                    ) * d_wspk
                d_raw = d_x if mask_col is None else d_x * mask_col
                if d_spk_ext[li - 1][t] is None:
                    d_spk_ext[li - 1][t] = d_raw
                else:
                    d_spk_ext[li - 1][t] = d_spk_ext[li - 1][t] + d_raw

            d_v_next = d_v
            d_isc_next = d_isc

    return grads


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_network(cls, net):
        state = cls()
        for name, p in named_parameters(net).items():
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        return state


def optimizer_step(net, grads, opt_state, cfg: TrainConfig):
    """Apply one sgd or adam update in place; aborts on non-finite gradients."""
    params = named_parameters(net)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    lr = cfg.learning_rate
    if cfg.optimizer == "sgd":
        for name, p in params.items():
            p[...] = p - lr * grads[name]
        return
    opt_state.step += 1
    t = opt_state.step
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for name, p in params.items():
        g = grads[name]
        m = opt_state.m[name]
        v = opt_state.v[name]
        m[...] = b1 * m + (1.0 - b1) * g
        v[...] = b2 * v + (1.0 - b2) * g * g
        p[...] = p - lr * (m / corr1) / (np.sqrt(v / corr2) + eps)


@dataclass
class TrainResult:
    params: list
    best_params: list
    opt_state: OptimizerState
    best_epoch: int
    best_f1: float
    log_rows: list = field(default_factory=list)


def format_log_row(epoch, train_loss, precision, recall, f1):
    return f"{epoch}\t{train_loss:.6f}\t{precision:.4f}\t{recall:.4f}\t{f1:.4f}"


def train(train_examples, val_examples, table, net_cfg: NetworkConfig,
          cfg: TrainConfig, net=None, opt_state=None, start_epoch=0,
          log_fn=None):
    """Mini-batch training with per-epoch seeded shuffling.

    Each epoch reshuffles with a generator derived from (seed, epoch), so a
    run resumed from a checkpoint at start_epoch replays the identical batch
    sequence an uninterrupted run would have seen. Returns the final and the
    best-validation-F1 parameters plus one log row per epoch.
    """
    from .data import batchify

    cfg.validate()
    net_cfg.validate()
    if not train_examples:
        raise ConfigError("training set is empty")
    if net is None:
        init_rng = np.random.default_rng([cfg.seed, 1])
        net = init_network(net_cfg, init_rng, dtype=np.float32)
    if opt_state is None:
        opt_state = OptimizerState.for_network(net)

    result = TrainResult(
        params=net, best_params=copy.deepcopy(net), opt_state=opt_state,
        best_epoch=-1, best_f1=-1.0,
    )
    for epoch in range(start_epoch, cfg.epochs):
        shuffle_rng = np.random.default_rng([cfg.seed, 2, epoch])
        batches = batchify(train_examples, table, cfg.batch_size, shuffle_rng)
        loss_sum = 0.0
        n_examples = 0
        for batch in batches:
            prob, trace = forward(batch.embeddings, net, net_cfg, mask=batch.mask)
            loss = cross_entropy(prob, batch.labels, batch.mask)
            grads = backward(trace, batch.labels, batch.mask, net, net_cfg)
            optimizer_step(net, grads, opt_state, cfg)
            b = batch.labels.shape[0]
            loss_sum += loss * b
            n_examples += b
        train_loss = loss_sum / n_examples

        precision, recall, f1 = evaluate(val_examples, table, net, net_cfg,
                                         cfg.batch_size)[:3]
        result.log_rows.append((epoch, train_loss, precision, recall, f1))
        if log_fn is not None:
            log_fn(format_log_row(epoch, train_loss, precision, recall, f1))
        if f1 > result.best_f1:
            result.best_f1 = f1
            result.best_epoch = epoch
            result.best_params = copy.deepcopy(net)
    return result


def evaluate(examples, table, net, net_cfg, batch_size=8):
    """Span-level micro P/R/F1 of the network's predictions on `examples`."""
    from .data import batchify
    from .metrics import decode_bio, extract_spans, span_f1

    if not examples:
        return 1.0, 1.0, 1.0, 0, 0, 0
    batches = batchify(examples, table, batch_size, rng=None)
    gold_spans = []
    pred_spans = []
    sent = 0
    for batch in batches:
        prob, _ = forward(batch.embeddings, net, net_cfg, mask=batch.mask)
        pred_rows = decode_bio(prob, batch.mask)
        for i, pred in enumerate(pred_rows):
            n_tok = int(batch.mask[i].sum())
            gold = [("O", "B", "I")[c] for c in batch.labels[i, :n_tok]]
            gold_spans.extend((sent, s, e) for s, e in extract_spans(gold))
            pred_spans.extend((sent, s, e) for s, e in extract_spans(pred))
            sent += 1
    return span_f1(gold_spans, pred_spans)


def tiny_gradcheck_config(mode=TERNARY, centering="zero"):
    """The small double-precision configuration the gradient check runs at."""
    return NetworkConfig(
        time_steps=3, spike_mode=mode, channels=2, kernel=3, n_spiking_conv=2,
        embedding_dim=2, surrogate_centering=centering,
    )


def grad_check(net_cfg: NetworkConfig, seed=0, h=1e-5, mutate=None):
    """Max relative error between analytic and central-difference gradients.

    Runs the soft-spike forward in float64 on a single random three-token
    sentence and perturbs every parameter entry by +/-h.
    """
    net_cfg.validate()
    rng = np.random.default_rng([seed, 3])
    net = init_network(net_cfg, rng, dtype=np.float64)
    b, r = 1, 3
    emb = rng.normal(0.0, 1.0, size=(b, r, net_cfg.embedding_dim))
    labels = rng.integers(0, 3, size=(b, r))
    mask = np.ones((b, r))

    def loss_value():
        prob, _ = forward(emb, net, net_cfg, mask=mask, soft=True)
        return cross_entropy(prob, labels, mask)

    prob, trace = forward(emb, net, net_cfg, mask=mask, soft=True)
    grads = backward(trace, labels, mask, net, net_cfg, mutate=mutate)

    max_rel = 0.0
    for name, p in named_parameters(net).items():
        flat = p.reshape(-1)
        g_flat = grads[name].reshape(-1)
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + h
            up = loss_value()
            flat[idx] = keep - h
            down = loss_value()
            flat[idx] = keep
            fd = (up - down) / (2.0 * h)
            rel = abs(g_flat[idx] - fd) / max(abs(g_flat[idx]), abs(fd), 1e-6)
            max_rel = max(max_rel, rel)
    return max_rel
