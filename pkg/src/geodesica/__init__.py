"""Surface reconstruction from nets of geodesic curves.

Each cell of the net is handled on its own: the contour is projected to a
plane, a biharmonic problem for the conformal factor gives a target Gaussian
curvature, a curvature Monge-Ampere solve produces the height function, and a
cotangent Laplace-Beltrami residual decides whether the patch is kept or the
cell is split along a surface geodesic.
"""

__version__ = "0.1.0"
