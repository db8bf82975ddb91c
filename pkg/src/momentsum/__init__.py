"""Moment subset-sum problems over finite fields with monomial and Dickson evaluation sets."""

__version__ = "0.1.0"
