"""HTTP service exposing simulation, cut checking and the sweeps."""
