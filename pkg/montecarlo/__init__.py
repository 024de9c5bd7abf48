"""Phase-space Monte Carlo oracle."""
