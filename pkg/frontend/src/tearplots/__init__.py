"""Figure regeneration for tearfilm simulation outputs."""

from .figures import FIGURES, render

__version__ = "0.1.0"

__all__ = ["FIGURES", "render", "__version__"]
