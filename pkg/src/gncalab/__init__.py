"""Graph cellular automata laboratory: differentiable message passing on
geometric graphs, reference dynamics (Voronoi majority rule, boids), and
trainers that fit graph networks to those dynamics or to fixed targets."""

__version__ = "0.1.0"

from .autodiff import NonFiniteError, Tape, Tensor, param
from .graphs import Graph, PointCloud, delaunay, grid2d, radius_graph, swiss_roll, uniform_square
from .model import BoidsGnca, BoidsGncaConfig, GncaConfig, GncaModel
from .rng import Stream
from .rules import BoidsConfig, VoronoiRule, boids_rollout, boids_step, rollout, voronoi_step

__all__ = [
    "BoidsConfig",
    "BoidsGnca",
    "BoidsGncaConfig",
    "Graph",
    "GncaConfig",
    "GncaModel",
    "NonFiniteError",
    "PointCloud",
    "Stream",
    "Tape",
    "Tensor",
    "VoronoiRule",
    "__version__",
    "boids_rollout",
    "boids_step",
    "delaunay",
    "grid2d",
    "param",
    "radius_graph",
    "rollout",
    "swiss_roll",
    "uniform_square",
    "voronoi_step",
]
