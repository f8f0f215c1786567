"""Track a moving target from quantized sensor reports while splitting a
fixed per-step bit budget across the sensors.

The budget split maximizes the determinant of the predicted Fisher
information matrix.  Six policies are provided: exhaustive enumeration,
a convex relaxation solved by a log-barrier Newton method with
probabilistic decoding, a dynamic-programming trellis, bit reduction
from full rate, greedy bit addition, and nearest-neighbor.
"""

from . import allocators, convex, fisher, harness, model, quantizer, tracker

__all__ = ["allocators", "convex", "fisher", "harness", "model",
           "quantizer", "tracker"]

__version__ = "0.1.0"
