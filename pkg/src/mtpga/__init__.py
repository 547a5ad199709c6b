"""Principal geodesic analysis for ensembles of merge trees and persistence diagrams."""

__version__ = "0.1.0"

from .ingest.grid import ScalarFieldGrid, load_scalar_field
from .ingest.merge_tree import (
    MergeTree,
    compute_merge_tree,
    extract_pairs,
    simplify,
    merge_saddles,
    branch_decomposition,
)
from .ingest.bdt import (
    Bdt,
    normalize,
    preprocess_bdt,
    bdt_to_merge_tree,
    absolute_persistence,
    validate_bdt,
)
from .metrics import (
    ground_distance,
    diagonal_projection,
    w2_diagrams,
    wt2_bdts,
    geodesic,
    interpolate,
    frechet_barycenter,
    Assignment,
    GeodesicVector,
)
from .pga import (
    GeodesicAxis,
    PgaBasis,
    FitReport,
    fit_basis,
    reconstruct,
    project_tree,
    fitting_energy,
)
from .analysis import (
    compress,
    decompress,
    reconstruction_error,
    layout_2d,
    projected_variance,
    persistence_correlation,
    sim_indicator,
    pgs_surface,
    Layout2D,
    CorrelationView,
    PgsMesh,
)
from .ensemble import EnsembleManifest, load_manifest, load_ensemble, default_n1

__all__ = [
    "ScalarFieldGrid",
    "load_scalar_field",
    "MergeTree",
    "compute_merge_tree",
    "extract_pairs",
    "simplify",
    "merge_saddles",
    "branch_decomposition",
    "Bdt",
    "normalize",
    "preprocess_bdt",
    "bdt_to_merge_tree",
    "absolute_persistence",
    "validate_bdt",
    "ground_distance",
    "diagonal_projection",
    "w2_diagrams",
    "wt2_bdts",
    "geodesic",
    "interpolate",
    "frechet_barycenter",
    "Assignment",
    "GeodesicVector",
    "GeodesicAxis",
    "PgaBasis",
    "FitReport",
    "fit_basis",
    "reconstruct",
    "project_tree",
    "fitting_energy",
    "compress",
    "decompress",
    "reconstruction_error",
    "layout_2d",
    "projected_variance",
    "persistence_correlation",
    "sim_indicator",
    "pgs_surface",
    "Layout2D",
    "CorrelationView",
    "PgsMesh",
    "EnsembleManifest",
    "load_manifest",
    "load_ensemble",
    "default_n1",
]
