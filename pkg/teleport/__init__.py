"""Teleportation protocol and image pipeline."""
