"""Conversation-thread toolkit: reconstruct dialogue trees from comment dumps,
label hate/counterspeech pairs by the hater's follow-up reaction, profile the
language of counterspeech, and train predictors of that reaction."""

__version__ = "0.1.0"
