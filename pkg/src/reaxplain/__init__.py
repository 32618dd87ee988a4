"""Formally verified minimal/minimum abductive explanations and
contrastive examples for multi-step executions of ReLU-network-controlled
reactive systems, with a built-in complete verifier."""

__version__ = "0.1.0"
