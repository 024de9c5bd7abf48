"""Added-noise covariance by deterministic quadrature."""
