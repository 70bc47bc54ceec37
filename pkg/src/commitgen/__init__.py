"""Commit message generation from AST paths, TF-IDF retrieval and a ConvNet ranker."""

__version__ = "0.1.0"
