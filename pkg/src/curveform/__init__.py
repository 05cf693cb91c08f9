"""Leader-follower formation control of unicycle agents along parametric curves."""

from curveform.curves import (
    BasisFamily,
    ParametricCurve,
    SampleSet,
    StackedBasis,
    assign_parameters,
    basis_row,
    bezier_to_polynomial,
    evaluate_curve,
    fit_coefficients,
    pseudoinverse,
    stack_basis,
    validate_assumptions,
)
from curveform.errors import (
    ConfigurationError,
    CurveformError,
    InsufficientSamples,
    InvalidArgument,
    NotSpanningTree,
    NumericalAbort,
    ScenarioError,
    SingularSystem,
)
from curveform.simulation import Scenario, TrajectoryLog, run_scenario, validate_scenario
from curveform.topology import (
    DirectedTopology,
    build_laplacian,
    has_rooted_spanning_tree,
    theorem1_matrices,
)

__version__ = "0.1.0"

__all__ = [
    "BasisFamily",
    "ConfigurationError",
    "CurveformError",
    "DirectedTopology",
    "InsufficientSamples",
    "InvalidArgument",
    "NotSpanningTree",
    "NumericalAbort",
    "ParametricCurve",
    "SampleSet",
    "Scenario",
    "ScenarioError",
    "SingularSystem",
    "StackedBasis",
    "TrajectoryLog",
    "assign_parameters",
    "basis_row",
    "bezier_to_polynomial",
    "build_laplacian",
    "evaluate_curve",
    "fit_coefficients",
    "has_rooted_spanning_tree",
    "pseudoinverse",
    "run_scenario",
    "stack_basis",
    "theorem1_matrices",
    "validate_assumptions",
    "validate_scenario",
]
