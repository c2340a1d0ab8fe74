"""Word-in-context representations learned from aligned translations.

A bidirectional peephole-LSTM encoder produces one vector per token
occurrence; training predicts the aligned translation of each token, and
the learned encoder transfers to supersense tagging, lexical substitution,
and lexical-translation feature export.
"""

__version__ = "0.1.0"
