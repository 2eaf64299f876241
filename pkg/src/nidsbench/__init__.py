"""nidsbench: batch and data-stream intrusion-detection benchmark on the
KDD99 dataset family."""

__version__ = "0.1.0"
