"""Quantum computing as a service: simulator backend, Shor workflow, job service."""

__version__ = "0.1.0"
