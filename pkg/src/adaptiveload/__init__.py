"""AdaptiveLoad: dual-constraint bucket scheduling, cost-model fitting, a
data-parallel step simulator, and a reference fused LayerNorm-Modulate
operator."""

from . import adaln, cluster_sim, costfit, scheduler, shapes

__version__ = "0.1.0"

__all__ = ["adaln", "cluster_sim", "costfit", "scheduler", "shapes", "__version__"]
