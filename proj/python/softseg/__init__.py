"""SoftSeg: soft-label segmentation training scheme, C++ core with Python bindings."""

try:
    from ._core import (
        adaptive_wing_grad,
        adaptive_wing_loss,
        connected_components,
        cosine_annealing_lr,
        dice_loss,
        generate_phantom,
        lesion_metrics,
        norm_relu,
        optimize_threshold,
        resample,
        sigmoid,
        value_distribution,
        voxel_metrics,
        wilcoxon_signed_rank,
    )
except ImportError:  # running against a build tree with _core on PYTHONPATH
    from _core import (
        adaptive_wing_grad,
        adaptive_wing_loss,
        connected_components,
        cosine_annealing_lr,
        dice_loss,
        generate_phantom,
        lesion_metrics,
        norm_relu,
        optimize_threshold,
        resample,
        sigmoid,
        value_distribution,
        voxel_metrics,
        wilcoxon_signed_rank,
    )

__all__ = [
    "adaptive_wing_grad",
    "adaptive_wing_loss",
    "connected_components",
    "cosine_annealing_lr",
    "dice_loss",
    "generate_phantom",
    "lesion_metrics",
    "norm_relu",
    "optimize_threshold",
    "resample",
    "sigmoid",
    "value_distribution",
    "voxel_metrics",
    "wilcoxon_signed_rank",
]

__version__ = "0.1.0"
