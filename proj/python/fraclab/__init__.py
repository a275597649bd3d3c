"""Discrete fractional p-Laplacian on intervals and discs."""

from ._core import (
    ConfigError,
    ConvergenceError,
    DivergenceError,
    Domain,
    FraclabError,
    GeometryError,
    Grid,
    NumericalError,
    Params,
    PreconditionError,
    SingularCaseError,
    Weights,
    __version__,
    apply_operator,
    assemble_weights,
    boundary_ratio,
    build_grid,
    criterion_ids,
    discrete_energy,
    distance_to_complement,
    eval_pointwise,
    field_names,
    residual,
    run_config,
    run_criterion,
    sample_field,
    solve,
    torsion,
)


def torsion_on(domain, p, s, n, tol=1e-10):
    """Grid and torsion function for the given domain and operator."""
    grid = build_grid(domain, n)
    weights = assemble_weights(grid, Params(p, s))
    u, report = torsion(weights, tol=tol)
    return grid, u, report


__all__ = [name for name in dir() if not name.startswith("_")]
