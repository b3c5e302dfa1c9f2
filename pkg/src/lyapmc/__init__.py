"""Monte Carlo estimation of Lyapunov exponents for Brownian motion in a Poissonian potential."""
__version__ = "0.1.0"
