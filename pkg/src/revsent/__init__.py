"""Review sentiment pipeline: meta features, TF-IDF baselines, CNN/HAN encoders,
multi-task heads and token attribution on a small numpy autodiff core."""

__version__ = "0.1.0"
