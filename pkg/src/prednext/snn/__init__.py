from .encoder import (
    EncoderConfig,
    EncoderState,
    SEWBlock,
    SpikingEncoder,
    TemporalFeatureSequence,
    TimestepBatchNorm,
    encode_clip,
    sew_connect,
)
from .neuron import LIFConfig, LIFNode, lif_step, spike_fn, surrogate_grad, surrogate_primitive

__all__ = [
    "EncoderConfig",
    "EncoderState",
    "LIFConfig",
    "LIFNode",
    "SEWBlock",
    "SpikingEncoder",
    "TemporalFeatureSequence",
    "TimestepBatchNorm",
    "encode_clip",
    "lif_step",
    "sew_connect",
    "spike_fn",
    "surrogate_grad",
    "surrogate_primitive",
]
