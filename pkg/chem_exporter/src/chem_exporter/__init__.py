"""Quantum-chemistry exporter producing low-rank-completion input bundles."""

from .backend import ActiveSpaceSolution, run_backend
from .bundle_io import BundleData, load_bundle, save_bundle
from .errors import (
    ChemistryBackendFailure,
    DimensionMismatch,
    ExporterError,
    GeometryError,
)
from .export import (
    ExportResult,
    ExportSpec,
    export,
    solution_to_bundle,
)
from .geometry import (
    Molecule,
    frozen_core_count,
    load_geometry,
    parse_geometry,
)
from .pack import SECTORS, pack_sector, sector_dim, trace_target, unpack_sector
from .rotate import apply_basis

__version__ = "0.1.0"
