"""Trigger-poisoning toolkit: poisoned data generation, small-model training,
trojan metrics, and gradient-based backdoor detection."""

__version__ = "0.1.0"
