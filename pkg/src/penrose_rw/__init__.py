"""Random walk on Penrose tilings built from de Bruijn pentagrids."""
from .corrector import (
    CorrectorField,
    DriftField,
    SublinearityProfile,
    cocycle_check,
    drift_field,
    solve_harmonic,
    solve_resolvent,
    sublinearity_profile,
)
from .graph import PenroseGraph, StepCatalog, build_graph, graph_distance, step_catalog
from .pentagrid import (
    TAU,
    GridLine,
    GridParams,
    Intersection,
    StarVectors,
    intersections_in_disk,
    regularity_check,
    sample_environment,
    star_vectors,
)
from .pipeline import Environment, RunConfig, prepare_environment, run_verify
from .stats import (
    DiffusionEstimate,
    TestReport,
    corrector_influence,
    estimate_D_empirical,
    estimate_D_generator,
    gaussianity_test,
    isotropy_test,
)
from .tiling import Patch, Ribbon, Tile, build_patch, dual_tile, recenter, ribbon_distance, ribbon_through, strip_index
from .walk import CorrectedPath, ScaledPath, WalkPath, correct_path, scale_path, simulate, simulate_batch

__version__ = "0.1.0"
