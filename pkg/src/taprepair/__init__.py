"""Verification and repair of trigger-action rules for smart homes."""

__version__ = "0.1.0"
