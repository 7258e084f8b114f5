"""News co-occurrence network and sentiment event-study toolkit."""

__version__ = "0.1.0"
