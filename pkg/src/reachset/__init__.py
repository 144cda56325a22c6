"""Sampling-based reachable set estimation with finite-sample guarantees."""
