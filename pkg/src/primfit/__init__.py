"""primfit: hierarchical primitive-shape abstraction of raster images.

A library and CLI that approximate images by iteratively adding optimally
colored primitive shapes chosen by randomized hill climbing against an RMSE
objective, with multi-level SVG checkpointing, entropy analysis, and
dataset-scale batch tooling.
"""

__version__ = "0.1.0"
