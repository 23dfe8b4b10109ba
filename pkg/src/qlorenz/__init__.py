"""Post-selected quantum time marching for the Lorenz system, simulated on statevectors."""
from .dynamics import LorenzParams

__version__ = "0.1.0"
__all__ = ["LorenzParams", "__version__"]
