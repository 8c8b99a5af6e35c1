"""Point-prompted small-object detection at desk scale.

A detector that finds every instance of the categories a user marks with
point prompts, plus the numerics (reverse-mode autodiff), synthetic data,
cyclic-prompt training curriculum, AP evaluation harness, and a local
inference service it is built on.
"""

from . import autodiff, data, metrics, model, service, train

__version__ = "0.1.0"

__all__ = ["autodiff", "data", "metrics", "model", "service", "train", "__version__"]
