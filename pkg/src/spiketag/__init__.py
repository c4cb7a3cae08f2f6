"""Spiking-network sequence tagger for aspect-term extraction.

Binary and ternary leaky integrate-and-fire layers over token embeddings,
trained with hand-derived spatio-temporal backpropagation through an
arctangent surrogate gradient, plus span-level evaluation and an analytic
FLOP/SOP energy model.
"""

__version__ = "0.1.0"

from .layers import NetworkConfig, forward, init_network
from .training import TrainConfig, backward, cross_entropy, grad_check, train

__all__ = [
    "NetworkConfig",
    "TrainConfig",
    "backward",
    "cross_entropy",
    "forward",
    "grad_check",
    "init_network",
    "train",
    "__version__",
]
