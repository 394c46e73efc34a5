"""Per-layer contextual embedding exporter for the hypermatch pipeline."""

from .export import ExportConfig, ExportError, export, read_corpus, write_embeddings

__all__ = ["ExportConfig", "ExportError", "export", "read_corpus", "write_embeddings"]
