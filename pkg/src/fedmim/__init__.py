"""Federated masked-image-modeling pre-training for ultrasound, desk scale."""

__version__ = "0.1.0"
