"""Online-learning pan-tilt camera control on simulated road networks."""

from .camera import CameraActionSet, FusionState, action_set, action_sets, fuse, join, observe
from .controller import ControllerConfig, PicolController, cew_update, ew_update, picol_step
from .errors import *  # noqa: F401,F403
from .harness import RunLog, ScenarioConfig, bundled_config, compare_runs, load_config, run_scenario
from .metrics import detection_delay, edge_scores, hourly_scores
from .network import RoadGraph, build_graph, bundled_graph, default_placement, edge_adjacency
from .objectives import loss_link, loss_network, loss_route
from .predictor import GraphDiffusionPredictor, fit_graph_diffusion
from .routing import replan_loop, shortest_path
from .simulator import DiurnalProfile, IncidentSpec, Trace, generate_trace, replay_trace

__version__ = "0.1.0"
