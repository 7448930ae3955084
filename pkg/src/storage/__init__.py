"""Output artifacts."""
