"""Finite-element laboratory for the planar Robin torsion problem.

Solves -Δu = 1 with du/dν + βu = 0 on Lipschitz planar domains, computes
exact level-set functionals and rearrangements of the discrete solution,
and checks the symmetrization comparison inequalities against the explicit
radial solution on the equal-area disk.
"""

from .comparison import (
    CheckRecord,
    ComparisonReport,
    RadialReference,
    convergence_study,
    domain_asymmetry,
    rigidity_probe,
    standard_checks,
)
from .fem import (
    ScalarField,
    SolveOptions,
    assemble_robin_system,
    field_extrema,
    rayleigh_quotient,
    solve,
    solve_torsion,
    torsional_rigidity,
)
from .geometry import (
    Disk,
    DomainSpec,
    Ellipse,
    PerturbedDisk,
    Polygon,
    Rectangle,
    TriangleMesh,
    build_mesh,
    mesh_area,
    mesh_perimeter,
    parse_domain,
    read_mesh,
    refine_uniform,
    write_mesh,
)
from .rearrange import (
    DistributionProfile,
    LevelSetGeometry,
    RearrangementProfile,
    circle_fit,
    decreasing_rearrangement,
    distribution,
    exterior_reciprocal_integral,
    isoperimetric_residual,
    level_set_geometry,
    schwartz_value,
)

__version__ = "0.1.0"
