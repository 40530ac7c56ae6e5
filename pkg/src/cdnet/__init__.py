"""cdnet: a desk-scale lab for pilot-assisted MIMO-OFDM channel acquisition.

The package couples a from-scratch reverse-mode autodiff engine, a geometric
multipath channel simulator, complex-mixer sequence models that fuse past
full channels with a coarse present pilot estimate, and reproducible
evaluation protocols (accuracy sweeps, disturbance robustness, autoregressive
serving).
"""

from .autodiff import Tensor, no_grad
from .complexops import ComplexTensor

__version__ = "0.1.0"

__all__ = ["Tensor", "ComplexTensor", "no_grad", "__version__"]
