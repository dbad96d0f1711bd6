"""Monte Carlo Lyapunov spectra of flat bundles over hyperbolic surfaces."""

__version__ = "0.1.0"
