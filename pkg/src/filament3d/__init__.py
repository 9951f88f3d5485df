"""Multi-view 3D centerline reconstruction and piece-wise clothoid fitting."""

__version__ = "0.1.0"
