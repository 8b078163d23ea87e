"""Structure-aware diminished reality for indoor equirectangular panoramas.

The pipeline removes an object from a 360deg indoor panorama in two stages:
a segmentation net first predicts the ceiling/wall/floor layout of the
masked scene, then a gated-convolution generator fills the hole while a
layout-driven regional normalization keeps the fill consistent with that
structure.  Everything runs at desk scale on CPU against a procedural
cuboid-room dataset; no external downloads are required.
"""

__version__ = "0.1.0"
