"""Analytic on-device-learning cost model.

Op counts only (one op = one multiply or one add); latency and energy are
deliberately out of scope. Gradient-phase costs for the fine-tuning
baselines are labeled estimates derived from the forward-pass count.
"""

from dataclasses import dataclass

from .errors import ValidationError


@dataclass
class CostBreakdown:
    cost_fp: int = 0
    cost_gc: int = 0
    cost_bp: int = 0
    cost_wu: int = 0
    cost_hdc: int = 0
    t_itr: int = 1
    n_sample: int = 0

    def __post_init__(self):
        for name in ("cost_fp", "cost_gc", "cost_bp", "cost_wu", "cost_hdc",
                     "n_sample"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.t_itr < 1:
            raise ValidationError("t_itr must be >= 1")


def cost_full_ft(b: CostBreakdown) -> int:
    """Iterative training updating every weight: forward, gradient,
    backward, and weight-update phases all paid per iteration."""
    return b.t_itr * b.n_sample * (b.cost_fp + b.cost_gc + b.cost_bp + b.cost_wu)


def cost_partial_ft(b: CostBreakdown) -> int:
    """Iterative training of the last layer(s) only: forward + gradient."""
    return b.t_itr * b.n_sample * (b.cost_fp + b.cost_gc)


def cost_fsl_hdnn(b: CostBreakdown) -> int:
    """Single-pass pipeline: one forward pass plus HDC work per sample."""
    return b.n_sample * (b.cost_fp + b.cost_hdc)


def estimate_ft_phases(cost_fp):
    """FP-proportional estimates for the gradient phases of full FT.

    These exist only to render comparison plots; they are estimates, not
    measurements: GC ~ FP, BP ~ FP, WU ~ 0.1 FP."""
    return {"cost_gc": cost_fp, "cost_bp": cost_fp, "cost_wu": cost_fp // 10}


def estimate_partial_gc(feature_dim, n_classes):
    """Gradient-calculation estimate for partial FT, which retrains only
    the classifier head on frozen features: forward, gradient, and update
    of a C x F linear layer."""
    return 3 * n_classes * feature_dim


def hdc_cost_per_sample(feature_dim, hv_dim, n_classes, include_inference=True):
    """Encode (D*F MAC-equivalents) + aggregate (D adds) per sample, plus
    one C*D-distance inference when queried."""
    cost = hv_dim * feature_dim + hv_dim
    if include_inference:
        cost += n_classes * hv_dim
    return cost
