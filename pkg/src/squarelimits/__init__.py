"""Limit sets realized by zero-entropy square homeomorphisms, built and checked numerically."""
