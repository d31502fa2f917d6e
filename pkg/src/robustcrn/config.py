"""Default tolerances and horizons shared by the simulator, harness and CLI."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Defaults:
    rtol: float = 1e-8
    atol: float = 1e-10
    tol_conv: float = 1e-3
    horizon: float = 1e3
    boundary_horizon: float = 1e6
    # geometric checkpoints t0 * 10**(i / per_decade)
    t0: float = 0.1
    per_decade: int = 4
    window: int = 5
    delta_floor: float = 0.5
    bound_slack: float = 1e-6


DEFAULTS = Defaults()
