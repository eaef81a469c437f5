"""Surface reconstruction from unoriented point clouds.

Trains a signed-distance MLP with a query-pulling loss plus connectivity
losses derived from 0-dimensional persistence of the field sampled on a
cubical grid, then extracts and scores a triangle mesh.
"""

__version__ = "0.1.0"
