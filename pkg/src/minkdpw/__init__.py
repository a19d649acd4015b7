"""Loop-group construction of spacelike CMC surfaces in Minkowski 3-space."""
from .loopcore import LoopBandPolicy, MatrixLoop, omega, psi
from .factorize import classify_cell, iwasawa_constant, iwasawa_kernel, switch_factor
from .potential import GridSpec, Potential, integrate_frame, parse_potential
from .symsurface import SurfaceMesh, build_surface
from .families import RevolutionParams, moduli_normalize, revolution_mesh, smyth_potential
from .geomcheck import ValidationReport, validate_mesh
from .export import export_mesh, mesh_from_json

__all__ = ["MatrixLoop", "LoopBandPolicy", "omega", "psi",
           "iwasawa_constant", "iwasawa_kernel", "switch_factor", "classify_cell",
           "Potential", "GridSpec", "parse_potential", "integrate_frame",
           "SurfaceMesh", "build_surface",
           "RevolutionParams", "revolution_mesh", "moduli_normalize", "smyth_potential",
           "ValidationReport", "validate_mesh", "export_mesh", "mesh_from_json"]
__version__ = "0.1.0"
