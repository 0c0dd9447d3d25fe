"""GAN-based synthetic feature generation and evaluation for 4-class emotion corpora."""

__version__ = "0.1.0"
