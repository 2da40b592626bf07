"""Logic-grid puzzle triplets for measuring how stereotypes shift LLM deductive reasoning."""

__version__ = "0.1.0"
