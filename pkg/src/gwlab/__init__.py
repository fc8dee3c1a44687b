"""gwlab: Monte Carlo laboratory for generalized Wigner matrices."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("gwlab")
except PackageNotFoundError:
    __version__ = "0.0.0+local"
