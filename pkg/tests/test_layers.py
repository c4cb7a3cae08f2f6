import numpy as np
import pytest

from oracles import ScalarLIF, conv1d_naive
from spiketag.errors import ConfigError, ValidationError
from spiketag.layers import (
    ENCODING,
    OUTPUT,
    SPIKING_CONV,
    LayerParams,
    NetworkConfig,
    encode_step,
    forward,
    init_network,
    output_logits,
    spiking_conv_step,
    weighted_spikes,
)
from spiketag.neuron import NeuronParams, NeuronState
from spiketag.tensorops import conv1d_same


def make_encoding_layer(c, e, k, rng, decay=0.1, v_thr=0.1, bias=None):
    return LayerParams(
        kind=ENCODING,
        kernels=rng.normal(size=(c, e, k)),
        bias=np.zeros(c) if bias is None else bias,
        neuron=NeuronParams(
            w_scd=np.full(c, decay), w_vd=np.full(c, decay), v_thr=v_thr
        ),
    )


def test_network_config_validation():
    NetworkConfig(embedding_dim=4).validate()
    with pytest.raises(ConfigError):
        NetworkConfig(n_spiking_conv=5).validate()
    with pytest.raises(ConfigError):
        NetworkConfig(n_spiking_conv=0).validate()
    with pytest.raises(ConfigError):
        NetworkConfig(time_steps=0).validate()
    with pytest.raises(ConfigError):
        NetworkConfig(spike_mode="analog").validate()


def test_zero_embeddings_zero_bias_never_spike():
    rng = np.random.default_rng(0)
    cfg = NetworkConfig(embedding_dim=3, channels=2, kernel=3, n_spiking_conv=1,
                        time_steps=5, spike_mode="ternary")
    layer = make_encoding_layer(2, 3, 3, rng)
    state = NeuronState.zeros((1, 4, 2), dtype=np.float64)
    emb = np.zeros((1, 4, 3))
    for _ in range(cfg.time_steps):
        spk, state = encode_step(emb, layer, state, cfg)
        assert not spk.any()


def test_encoding_reduces_to_scalar_trace():
    # B=R=E=C=K=1 collapses the encoder to a single scalar neuron whose
    # drive is kernel * embedding + bias
    cfg = NetworkConfig(embedding_dim=1, channels=1, kernel=1, n_spiking_conv=1,
                        time_steps=8, spike_mode="binary")
    rng = np.random.default_rng(3)
    kernel = 0.7
    emb_val = 0.9
    layer = LayerParams(
        kind=ENCODING,
        kernels=np.full((1, 1, 1), kernel),
        bias=np.asarray([0.05]),
        neuron=NeuronParams(w_scd=np.asarray([0.3]), w_vd=np.asarray([0.4]), v_thr=0.1),
    )
    oracle = ScalarLIF(0.3, 0.4, 0.1, "binary")
    state = NeuronState.zeros((1, 1, 1), dtype=np.float64)
    emb = np.full((1, 1, 1), emb_val)
    for _ in range(cfg.time_steps):
        spk, state = encode_step(emb, layer, state, cfg)
        o_spk, o_isc, o_v = oracle.step(kernel * emb_val + 0.05)
        assert spk[0, 0, 0] == o_spk
        assert state.v[0, 0, 0] == pytest.approx(o_v, abs=1e-15)


def test_first_step_spikes_equal_thresholded_drive():
    rng = np.random.default_rng(9)
    cfg = NetworkConfig(embedding_dim=4, channels=3, kernel=3, n_spiking_conv=1,
                        time_steps=1, spike_mode="binary")
    layer = make_encoding_layer(3, 4, 3, rng)
    emb = rng.normal(size=(2, 5, 4))
    drive = conv1d_same(emb, layer.kernels, layer.bias, padding=1)
    state = NeuronState.zeros((2, 5, 3), dtype=np.float64)
    spk, _ = encode_step(emb, layer, state, cfg)
    assert np.array_equal(spk, (drive - 0.1 >= 0).astype(float))


def test_spiking_conv_zero_in_zero_out():
    rng = np.random.default_rng(4)
    cfg = NetworkConfig(embedding_dim=2, channels=2, kernel=3, n_spiking_conv=1,
                        time_steps=3, spike_mode="ternary")
    layer = LayerParams(
        kind=SPIKING_CONV,
        kernels=rng.normal(size=(2, 2, 3)),
        bias=np.zeros(2),
        neuron=NeuronParams(
            w_scd=np.full(2, 0.1), w_vd=np.full(2, 0.1),
            w_fv_pos=np.asarray(1.0), w_fv_neg=np.asarray(1.0), v_thr=0.1,
        ),
    )
    state = NeuronState.zeros((1, 4, 2), dtype=np.float64)
    for _ in range(3):
        spk, state = spiking_conv_step(np.zeros((1, 4, 2)), layer, state, cfg)
        assert not spk.any()


def test_ternary_split_reconstructs_input():
    rng = np.random.default_rng(8)
    spikes = rng.integers(-1, 2, size=(2, 6, 3)).astype(np.float64)
    pos = np.maximum(spikes, 0.0)
    neg = np.minimum(spikes, 0.0)
    assert np.array_equal(pos + neg, spikes)
    assert set(np.unique(pos)) <= {0.0, 1.0}
    assert set(np.unique(neg)) <= {-1.0, 0.0}


def test_equal_weight_ternary_collapses_to_binary_formula():
    rng = np.random.default_rng(12)
    spikes = rng.integers(-1, 2, size=(2, 6, 3)).astype(np.float64)
    neuron = NeuronParams(
        w_scd=np.full(3, 0.1), w_vd=np.full(3, 0.1),
        w_fv_pos=np.asarray(0.37), w_fv_neg=np.asarray(0.37), v_thr=0.1,
    )
    ternary = weighted_spikes(spikes, neuron, "ternary")
    binary_formula = weighted_spikes(spikes, neuron, "binary")
    assert np.array_equal(ternary, binary_formula)


def test_binary_mode_ignores_negative_postsynaptic_weight():
    rng = np.random.default_rng(6)
    spikes = rng.integers(0, 2, size=(1, 5, 2)).astype(np.float64)
    neuron_a = NeuronParams(
        w_scd=np.full(2, 0.1), w_vd=np.full(2, 0.1),
        w_fv_pos=np.asarray(0.8), w_fv_neg=np.asarray(0.2), v_thr=0.1,
    )
    neuron_b = NeuronParams(
        w_scd=np.full(2, 0.1), w_vd=np.full(2, 0.1),
        w_fv_pos=np.asarray(0.8), w_fv_neg=np.asarray(-55.0), v_thr=0.1,
    )
    assert np.array_equal(
        weighted_spikes(spikes, neuron_a, "binary"),
        weighted_spikes(spikes, neuron_b, "binary"),
    )


def test_spike_alphabet_validation():
    cfg = NetworkConfig(embedding_dim=2, channels=2, kernel=3, n_spiking_conv=1,
                        spike_mode="binary")
    rng = np.random.default_rng(0)
    layer = LayerParams(
        kind=SPIKING_CONV,
        kernels=rng.normal(size=(2, 2, 3)),
        bias=np.zeros(2),
        neuron=NeuronParams(
            w_scd=np.full(2, 0.1), w_vd=np.full(2, 0.1),
            w_fv_pos=np.asarray(1.0), w_fv_neg=np.asarray(1.0), v_thr=0.1,
        ),
    )
    state = NeuronState.zeros((1, 3, 2), dtype=np.float64)
    bad = np.full((1, 3, 2), 0.5)
    with pytest.raises(ValidationError):
        spiking_conv_step(bad, layer, state, cfg, checked=True)


def test_output_logits_cases():
    rng = np.random.default_rng(2)
    layer = LayerParams(kind=OUTPUT, kernels=rng.normal(size=(3, 4)),
                        bias=rng.normal(size=3))
    zero = np.zeros((2, 5, 4))
    assert np.allclose(output_logits(zero, layer), layer.bias)

    ident = LayerParams(kind=OUTPUT, kernels=np.eye(3), bias=np.zeros(3))
    spikes = rng.integers(-1, 2, size=(1, 4, 3)).astype(float)
    assert np.array_equal(output_logits(spikes, ident), spikes)

    spikes = rng.integers(-1, 2, size=(2, 6, 4)).astype(float)
    out = output_logits(spikes, layer)
    for i in range(2):
        for j in range(6):
            expected = layer.kernels @ spikes[i, j] + layer.bias
            assert np.allclose(out[i, j], expected)


def full_net(cfg, seed=0, dtype=np.float64):
    return init_network(cfg, np.random.default_rng(seed), dtype=dtype)


def test_forward_prob_sums_to_time_steps(small_net_cfg, small_net):
    rng = np.random.default_rng(5)
    emb = rng.normal(scale=0.4, size=(2, 6, 5)).astype(np.float32)
    mask = np.ones((2, 6), dtype=np.float32)
    prob, _ = forward(emb, small_net, small_net_cfg, mask=mask)
    assert np.allclose(prob.sum(axis=-1), small_net_cfg.time_steps, atol=1e-5)


def test_forward_prob_sum_tight_in_float64(small_net_cfg):
    net = full_net(small_net_cfg)
    rng = np.random.default_rng(6)
    emb = rng.normal(scale=0.4, size=(1, 4, 5))
    prob, _ = forward(emb, net, small_net_cfg)
    assert np.allclose(prob.sum(axis=-1), small_net_cfg.time_steps, atol=1e-10)


def test_forward_output_bias_dominates_when_weights_zero():
    cfg = NetworkConfig(embedding_dim=2, channels=2, kernel=3, n_spiking_conv=1,
                        time_steps=1, spike_mode="ternary")
    net = full_net(cfg)
    for layer in net:
        layer.kernels[...] = 0.0
        layer.bias[...] = 0.0
    net[-1].bias[...] = np.asarray([0.0, 10.0, -10.0])
    emb = np.random.default_rng(0).normal(size=(1, 5, 2))
    prob, _ = forward(emb, net, cfg)
    assert prob.argmax(axis=-1).flatten().tolist() == [1] * 5
    assert np.all(prob[:, :, 1] > 0.999)


def test_forward_doubling_T_doubles_prob_for_static_net():
    cfg4 = NetworkConfig(embedding_dim=2, channels=2, kernel=3, n_spiking_conv=1,
                         time_steps=4, spike_mode="binary")
    cfg8 = NetworkConfig(embedding_dim=2, channels=2, kernel=3, n_spiking_conv=1,
                         time_steps=8, spike_mode="binary")
    net = full_net(cfg4)
    for layer in net:
        layer.kernels[...] = 0.0
        layer.bias[...] = 0.0
    emb = np.zeros((1, 3, 2))
    p4, _ = forward(emb, net, cfg4)
    p8, _ = forward(emb, net, cfg8)
    assert np.allclose(2.0 * p4, p8)


def test_sequence_length_preserved_through_stack():
    cfg = NetworkConfig(embedding_dim=3, channels=2, n_spiking_conv=2,
                        time_steps=2, spike_mode="ternary")
    net = full_net(cfg)
    rng = np.random.default_rng(0)
    for r in (1, 2, 7, 83):
        emb = rng.normal(size=(1, r, 3))
        prob, trace = forward(emb, net, cfg)
        assert prob.shape == (1, r, 3)
        for per_layer in trace.spk:
            assert all(s.shape[1] == r for s in per_layer)


def test_spike_alphabet_everywhere(small_net_cfg, small_net):
    rng = np.random.default_rng(1)
    emb = rng.normal(scale=0.5, size=(2, 5, 5)).astype(np.float32)
    for mode in ("binary", "ternary"):
        small_net_cfg.spike_mode = mode
        _, trace = forward(emb, small_net, small_net_cfg, checked=True)
        allowed = {0.0, 1.0} if mode == "binary" else {-1.0, 0.0, 1.0}
        for per_layer in trace.spk:
            for spk in per_layer:
                assert set(np.unique(spk)).issubset(allowed)


def test_forward_deterministic(small_net_cfg):
    rng = np.random.default_rng(2)
    emb = rng.normal(scale=0.5, size=(2, 6, 5)).astype(np.float32)
    p1, _ = forward(emb, full_net(small_net_cfg, seed=7), small_net_cfg)
    p2, _ = forward(emb, full_net(small_net_cfg, seed=7), small_net_cfg)
    assert np.array_equal(p1, p2)


def test_forward_masks_padding_against_batch_composition():
    # a sentence's outputs must not depend on how much padding its batch has
    cfg = NetworkConfig(embedding_dim=4, channels=3, n_spiking_conv=2,
                        time_steps=3, spike_mode="ternary")
    net = full_net(cfg)
    net[0].bias[...] = 0.3  # nonzero bias would otherwise drive pad positions
    rng = np.random.default_rng(4)
    emb = rng.normal(scale=0.5, size=(1, 4, 4))
    alone_prob, _ = forward(emb, net, cfg, mask=np.ones((1, 4)))
    padded = np.zeros((1, 9, 4))
    padded[:, :4] = emb
    mask = np.zeros((1, 9))
    mask[:, :4] = 1.0
    padded_prob, _ = forward(padded, net, cfg, mask=mask)
    assert np.allclose(alone_prob[0, :4], padded_prob[0, :4], atol=1e-12)


def test_init_network_structure_and_defaults():
    cfg = NetworkConfig(embedding_dim=6, channels=4, n_spiking_conv=3)
    net = full_net(cfg)
    kinds = [layer.kind for layer in net]
    assert kinds == [ENCODING] + [SPIKING_CONV] * 3 + [OUTPUT]
    assert net[0].kernels.shape == (4, 6, 5)
    assert net[1].kernels.shape == (4, 4, 5)
    assert net[-1].kernels.shape == (3, 4)
    assert np.all(net[1].neuron.w_scd == 0.1)
    assert np.all(net[1].neuron.w_vd == 0.1)
    assert float(net[1].neuron.w_fv_pos) == 1.0
    assert float(net[1].neuron.w_fv_neg) == 1.0
    assert net[0].neuron.w_fv_pos is None
