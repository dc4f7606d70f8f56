"""Local-phase modelling with complex wavelets."""
