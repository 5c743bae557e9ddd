"""Exception types shared across the solver."""


class VorflowError(Exception):
    """Base class for all solver errors."""


class DuplicateSeeds(VorflowError):
    """Two generating seeds are closer than the admissible tolerance."""


class SeedOutsideDomain(VorflowError):
    """A generating seed lies outside (or on the boundary of) the domain."""


class MeshError(VorflowError):
    """Internal tessellation failure (overflow, broken invariant)."""


class NonPhysicalState(VorflowError):
    """Equation of state evaluated on an inadmissible thermodynamic state."""


class SolverDiverged(VorflowError):
    """An iterative linear or fixed-point solve failed to converge."""


class SingularSystem(VorflowError):
    """All-incompressible pressure system with an incompatible right-hand side."""


class NegativeMass(VorflowError):
    """Remap flux drove a cell mass non-positive (displacement too large)."""


class UnknownScenario(VorflowError):
    """Benchmark scenario name not recognized."""
