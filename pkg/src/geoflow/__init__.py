"""geoflow: reconstruct inter-city interaction structure from check-in trajectories.

The pipeline runs: check-in ingestion and trip extraction, interaction-network
statistics, gravity-model fitting with a power-law distance cost, Monte Carlo
trip synthesis, multilevel community detection with consensus, and Voronoi
regionalization with GeoJSON export.
"""

__version__ = "0.1.0"

from .geo import City, DistanceMatrix, EARTH_RADIUS_KM, build_distance_matrix, great_circle_distance

__all__ = [
    "City",
    "DistanceMatrix",
    "EARTH_RADIUS_KM",
    "build_distance_matrix",
    "great_circle_distance",
    "__version__",
]
