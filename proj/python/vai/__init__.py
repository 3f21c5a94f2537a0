"""Visual attention and invariance pipeline: closed-form operations, the
sprite environment, and inference on saved checkpoints."""

from ._vai import (
    Adapter,
    Policy,
    SpriteWorld,
    Transporter,
    adapter_loss,
    drawer_reward,
    drawer_success,
    iou,
    reconstruction_loss,
    render_heatmap,
    threshold_mask,
    transport_features,
)

__all__ = [
    "Adapter",
    "Policy",
    "SpriteWorld",
    "Transporter",
    "adapter_loss",
    "drawer_reward",
    "drawer_success",
    "iou",
    "reconstruction_loss",
    "render_heatmap",
    "threshold_mask",
    "transport_features",
]
