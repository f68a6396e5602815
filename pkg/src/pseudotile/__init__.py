"""Self-affine recoding of pseudo-self-affine tilings."""
from .geometry import ExpansionMap, Region, adapted_expansion
from .tiling import DeloneMultiset, Patch, Tile, TilingWindow

__version__ = "0.1.0"

__all__ = ["ExpansionMap", "Region", "adapted_expansion", "DeloneMultiset", "Patch", "Tile",
           "TilingWindow", "__version__"]
