"""OPA model and phase compensation."""
