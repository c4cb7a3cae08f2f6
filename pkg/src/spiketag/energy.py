"""Analytic inference-cost model: FLOPs, spike-driven SOPs, and energy.

Conventions under this model: the encoding layer and the final decoder are
FLOP-costed at the dense-accelerator rate (their inputs are analog); the
spiking conv layers are SOP-costed, one accumulate per spike-driven tap, at
the neuromorphic rate. A synaptic operation costs 77 fJ; a dense FLOP costs
12.5 pJ; each negative-spike-driven SOP additionally pays a 3.7 pJ sign
cost (reported as its own line item so alternative accountings can be
recomputed from the counts).
"""

from dataclasses import dataclass, field

import numpy as np

from .layers import ENCODING, N_CLASSES, forward

ENERGY_PER_SOP = 77e-15
ENERGY_PER_FLOP_DNN = 12.5e-12
ENERGY_PER_SIGN = 3.7e-12

SNN = "snn"
DNN = "dnn"


@dataclass
class LayerProfile:
    name: str
    kind: str  # "conv" | "fc"
    flops: float
    sop_costed: bool = False  # False for the encoding and final layers
    gamma: float = 0.0
    gamma_neg: float = 0.0
    sops: float = 0.0
    neg_sops: float = 0.0
    neg_spike_count: int = 0
    energy: float = 0.0


@dataclass
class EnergyReport:
    layers: list = field(default_factory=list)
    total_flops: float = 0.0
    total_sops: float = 0.0
    total_energy: float = 0.0

    def rows(self):
        lines = ["name\tkind\tflops\tgamma\tsops\tenergy_mJ"]
        for lp in self.layers:
            lines.append(
                f"{lp.name}\t{lp.kind}\t{lp.flops:.0f}\t{lp.gamma:.4f}"
                f"\t{lp.sops:.0f}\t{lp.energy * 1e3:.6f}"
            )
        lines.append(
            f"TOTAL\t-\t{self.total_flops:.0f}\t-\t{self.total_sops:.0f}"
            f"\t{self.total_energy * 1e3:.6f}"
        )
        return "\n".join(lines)

    def to_dict(self):
        return {
            "layers": [vars(lp) for lp in self.layers],
            "total_flops": self.total_flops,
            "total_sops": self.total_sops,
            "total_energy_mJ": self.total_energy * 1e3,
        }


def flops_conv(c, d, w_c, h_c, w_w, h_w):
    """Conv-layer FLOPs: output maps x input channels x output extent x kernel extent x 2."""
    return float(c) * d * w_c * h_c * w_w * h_w * 2.0


def flops_fc(u, u_prev):
    return float(u) * u_prev * 2.0


def firing_rate(spike_trace, time_steps, mask=None):
    """Fraction of neuron-timesteps with a nonzero spike; -1 spikes count.

    spike_trace is the per-timestep list of (B, R, C) spike maps for one
    layer; mask restricts the count to real token positions.
    """
    nonzero = 0.0
    neurons = 0.0
    for spk in spike_trace:
        active = (spk != 0).astype(np.float64)
        if mask is not None:
            active = active * mask[:, :, None]
            neurons += float(mask.sum()) * spk.shape[-1]
        else:
            neurons += float(spk[..., 0].size) * spk.shape[-1]
        nonzero += float(active.sum())
    if neurons == 0:
        return 0.0
    return nonzero / neurons


def negative_rate(spike_trace, time_steps, mask=None):
    neg = 0.0
    neurons = 0.0
    for spk in spike_trace:
        active = (spk < 0).astype(np.float64)
        if mask is not None:
            active = active * mask[:, :, None]
            neurons += float(mask.sum()) * spk.shape[-1]
        else:
            neurons += float(spk[..., 0].size) * spk.shape[-1]
        neg += float(active.sum())
    if neurons == 0:
        return 0.0
    return neg / neurons


def layer_energy(profile, model=SNN, mode="binary"):
    """Joules for one layer under the chosen cost model."""
    if model == DNN or not profile.sop_costed:
        # dense layers, plus the FLOP-costed encoding and decoder of the SNN
        return ENERGY_PER_FLOP_DNN * profile.flops
    energy = ENERGY_PER_SOP * profile.sops
    if mode == "ternary":
        energy += ENERGY_PER_SIGN * profile.neg_sops
    return energy


def dnn_energy(flops):
    """12.5 pJ per FLOP, for baseline comparison tables."""
    return ENERGY_PER_FLOP_DNN * float(flops)


def profile_network(net, batch, cfg) -> EnergyReport:
    """Measure firing rates on a sample batch and assemble the cost report.

    FLOPs use the mean real-token sequence length of the sample; SOPs for a
    spiking conv layer are T x gamma x FLOPs with gamma measured in that
    layer (split into a negative-spike share for the ternary sign cost).
    """
    _, trace = forward(batch.embeddings, net, cfg, mask=batch.mask)
    mean_len = float(batch.mask.sum() / batch.mask.shape[0])
    t = cfg.time_steps
    report = EnergyReport()

    for li, layer in enumerate(net[:-1]):
        cin = layer.kernels.shape[1]
        cout = layer.kernels.shape[0]
        k = layer.kernels.shape[2]
        fl = flops_conv(cout, cin, mean_len, 1, k, 1)
        gamma = firing_rate(trace.spk[li], t, batch.mask)
        g_neg = negative_rate(trace.spk[li], t, batch.mask)
        prof = LayerProfile(
            name=f"{layer.kind}{li}", kind="conv", flops=fl,
            gamma=gamma, gamma_neg=g_neg,
        )
        neg_count = 0
        for spk in trace.spk[li]:
            neg_count += int(((spk < 0) * batch.mask[:, :, None]).sum())
        prof.neg_spike_count = neg_count
        if layer.kind != ENCODING:
            prof.sop_costed = True
            prof.sops = t * gamma * fl
            prof.neg_sops = t * g_neg * fl
        prof.energy = layer_energy(prof, SNN, cfg.spike_mode)
        report.layers.append(prof)

    out = net[-1]
    fl_out = flops_fc(N_CLASSES, out.kernels.shape[1]) * mean_len * t
    prof = LayerProfile(name="output", kind="fc", flops=fl_out)
    prof.energy = layer_energy(prof, SNN, cfg.spike_mode)
    report.layers.append(prof)

    report.total_flops = sum(lp.flops for lp in report.layers if not lp.sop_costed)
    report.total_sops = sum(lp.sops for lp in report.layers)
    report.total_energy = sum(lp.energy for lp in report.layers)
    return report
