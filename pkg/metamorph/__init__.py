"""
metamorph: discrete geodesic paths between images

This package computes time-discrete geodesics in the metamorphosis model by
alternating between a sequence of registrations and a linear solve for the
intermediate images, refined cascadically in time.
"""

__version__ = "0.1.0"
