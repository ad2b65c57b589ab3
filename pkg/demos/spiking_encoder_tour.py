"""A short look inside the spiking encoder: spikes, membrane state and features."""

import torch

from prednext.evaluation import consistency_error
from prednext.snn import LIFConfig, LIFNode, SpikingEncoder, lif_step
from prednext.snn.encoder import EncoderConfig

torch.manual_seed(0)

# A single LIF neuron driven by a constant current integrates, fires, resets.
cfg = LIFConfig()
v = torch.zeros(1)
trace = []
for _ in range(8):
    v, s = lif_step(v, torch.tensor([1.5]), cfg)
    trace.append(int(s.item()))
print("spike train for constant input 1.5:", trace)

# Left in training mode: an untrained encoder's running batch-norm statistics
# are still the identity and in eval mode it would stay silent.
enc = SpikingEncoder(EncoderConfig(widths=[8, 16], blocks=[1, 1], feature_dim=16), cfg)
clip = torch.rand(4, 6, 3, 16, 16)  # [batch, time, channels, height, width]

rates = {}
hooks = [
    m.register_forward_hook(lambda m, i, o, name=name: rates.__setitem__(name, o.mean().item()))
    for name, m in enc.named_modules()
    if isinstance(m, LIFNode)
]
with torch.no_grad():
    out = enc(clip)
for h in hooks:
    h.remove()

print("firing rate per LIF layer:")
for name, r in rates.items():
    print(f"  {name:24s} {r:.3f}")
print("per-step features", tuple(out.per_step.shape), "aggregate", tuple(out.aggregate.shape))

err, cos = consistency_error(out.per_step.double().numpy())
print(f"consistency error of an untrained encoder: {err:.3f} (mean cosine {cos:.3f})")
