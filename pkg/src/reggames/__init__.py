"""Regularity of Nash equilibria in finite normal-form and potential games."""

__version__ = "0.1.0"
