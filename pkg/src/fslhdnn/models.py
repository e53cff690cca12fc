"""Bundled desk-scale models and synthetic image data.

A pretrained full-size backbone is deliberately not shipped; these small
seeded CNNs give the early-exit and cost experiments something real to
run against at test speed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .extractor import BlockBoundary, Conv, ModelGraph, ReLU
from .rng import keyed_rng


def make_small_cnn(seed=0, in_ch=3, widths=(16, 32, 48, 64), k=3):
    """A 4-block (by default) conv/ReLU stack with stride-2 downsampling
    every other block. He-style weight scale keeps activations sane."""
    layers = []
    cin = in_ch
    for bi, cout in enumerate(widths):
        rng = keyed_rng(seed, 0xC0DE, bi)
        std = np.sqrt(2.0 / (cin * k * k))
        w = rng.normal(0.0, std, size=(cout, cin, k, k)).astype(np.float32)
        stride = 2 if bi % 2 else 1
        layers.append(Conv(w, stride=stride, padding=1))
        layers.append(ReLU())
        if bi != len(widths) - 1:
            layers.append(BlockBoundary())
        cin = cout
    return ModelGraph(layers)


def cluster_model(model, ch_sub=16, n_centroids=16, seed=0):
    """Return a copy of `model` with every conv layer weight-clustered."""
    from .clustering import cluster_layer

    layers = []
    for layer in model.layers:
        if isinstance(layer, Conv) and not layer.clustered:
            clustered = cluster_layer(layer.weights, min(ch_sub, layer.weights.shape[1]),
                                      n_centroids, seed,
                                      stride=layer.stride, padding=layer.padding)
            layers.append(Conv(clustered, stride=layer.stride,
                               padding=layer.padding))
        else:
            layers.append(layer)
    return ModelGraph(layers)


@dataclass
class ImageDataset:
    images: np.ndarray  # [n, c, h, w] float32
    labels: np.ndarray  # [n] int

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1


def make_synthetic_images(n_classes=8, samples_per_class=12, hw=16, channels=3,
                          separation=3.0, seed=0):
    """Per-class mean images plus unit Gaussian noise, clipped at zero."""
    if n_classes < 2:
        raise ValidationError("need at least 2 classes")
    rng = keyed_rng(seed, 0x1A6E)
    means = np.abs(rng.normal(0.0, 1.0, size=(n_classes, channels, hw, hw)))
    means *= separation
    imgs = np.repeat(means, samples_per_class, axis=0)
    imgs = imgs + rng.normal(0.0, 1.0, size=imgs.shape)
    imgs = np.maximum(imgs, 0.0).astype(np.float32)
    labels = np.repeat(np.arange(n_classes), samples_per_class)
    return ImageDataset(imgs, labels)
