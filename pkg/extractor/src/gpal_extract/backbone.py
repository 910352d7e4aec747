"""Frozen convolutional trunks producing pooled feature vectors."""

from __future__ import annotations

from pathlib import Path

import torch
from torchvision import models

_FACTORIES = {
    "resnet18": (models.resnet18, 512),
    "resnet34": (models.resnet34, 512),
    "resnet50": (models.resnet50, 2048),
}

RANDOM_WEIGHTS = "random"
_SEED = 0x5EED


def feature_dim(name: str) -> int:
    try:
        return _FACTORIES[name][1]
    except KeyError:
        raise ValueError(f"unknown backbone {name!r}; choose from {sorted(_FACTORIES)}") from None


def load_backbone(name: str, weights: str = RANDOM_WEIGHTS) -> torch.nn.Module:
    """Trunk with the classification head removed, frozen, in eval mode.

    ``weights`` is a local state-dict path, or "random" for a seeded
    untrained network (format/throughput work without a checkpoint).
    """
    factory, _ = _FACTORIES[name] if name in _FACTORIES else (None, None)
    if factory is None:
        raise ValueError(f"unknown backbone {name!r}; choose from {sorted(_FACTORIES)}")
    torch.manual_seed(_SEED)
    model = factory(weights=None)
    if weights != RANDOM_WEIGHTS:
        path = Path(weights)
        state = torch.load(path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.fc = torch.nn.Identity()
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return model


@torch.no_grad()
def embed_batch(model: torch.nn.Module, batch) -> torch.Tensor:
    return model(torch.as_tensor(batch))
