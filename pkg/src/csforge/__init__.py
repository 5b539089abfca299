"""csforge: build CMI-controlled code-switched MCQ datasets and evaluate models on them."""

__version__ = "0.1.0"
