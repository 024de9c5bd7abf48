"""PGM images, compensation profiles and run manifests."""
