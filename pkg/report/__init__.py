"""CSV tables and Markdown run summaries."""
