"""Credibility inference over news article / creator / subject graphs."""

__version__ = "0.1.0"
