"""Natural-language command interpreter for a mock trading interface.

Synthesizes labeled corpora from a template grammar, trains character-level
LSTM models with exact analytic gradients on plain numpy, and converts tagged
character sequences into validated structured trading commands served over
HTTP and a CLI.
"""

__version__ = "0.1.0"
