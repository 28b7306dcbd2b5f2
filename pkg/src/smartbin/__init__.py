"""Smart-bin pipeline."""
