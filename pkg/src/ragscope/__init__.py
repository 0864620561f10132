"""Self-hostable RAG diagnostics: distributed retrieval, snippet context
building, generation with attention attribution, and latency benchmarks."""

__version__ = "0.1.0"
