"""Flat key=value run configuration: file values, overridden by CLI flags.

Unknown keys are rejected. The effective configuration is echoed at startup,
one sorted key=value line each, so every run is auditable.
"""

from dataclasses import dataclass, fields

from .errors import ConfigError
from .layers import NetworkConfig
from .training import TrainConfig


@dataclass
class RunConfig:
    # paths
    data: str = ""
    embeddings: str = ""
    ckpt: str = ""
    out: str = ""
    # data handling
    corpus_mode: str = "strict"
    val_size: int = 150
    # network
    time_steps: int = 6
    spike_mode: str = "ternary"
    channels: int = 128
    kernel: int = 5
    n_spiking_conv: int = 3
    v_thr: float = 0.1
    decay_init: float = 0.1
    alpha: float = 2.0
    embedding_dim: int = 0
    surrogate_centering: str = "zero"
    # training
    batch_size: int = 8
    lr: float = 0.0001
    epochs: int = 50
    seed: int = 0
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def network_config(self):
        return NetworkConfig(
            time_steps=self.time_steps,
            spike_mode=self.spike_mode,
            channels=self.channels,
            kernel=self.kernel,
            n_spiking_conv=self.n_spiking_conv,
            v_thr=self.v_thr,
            decay_init=self.decay_init,
            alpha=self.alpha,
            embedding_dim=self.embedding_dim,
            surrogate_centering=self.surrogate_centering,
        ).validate()

    def train_config(self):
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.lr,
            epochs=self.epochs,
            seed=self.seed,
            optimizer=self.optimizer,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
        ).validate()

    def echo(self):
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype in (int, "int"):
            return int(raw)
        if ftype in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key}: cannot parse {raw!r} as a number")
    return raw


def load_config_file(path):
    """Parse a key=value file; blank lines and '#' comments are ignored."""
    cfg = RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, raw))
    return cfg


def apply_overrides(cfg, overrides):
    """Apply non-None flag values on top of file values."""
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, str(value)))
    return cfg
