"""trainer-adapter: consume csforge training manifests/configs and run a
smoke-scale low-rank fine-tune on a tiny built-in causal LM."""

__version__ = "0.1.0"
