"""Distributed evaluation of cut quantum circuits across untrusted QPUs."""

__version__ = "0.1.0"
