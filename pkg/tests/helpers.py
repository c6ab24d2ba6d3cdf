"""Shared test plumbing."""

from __future__ import annotations

from fracdyn.solver import CaputoIVP, SolverConfig, Trajectory, residual_check, solve_ivp

RESIDUAL_BOUND = 1e-3

# every completed trajectory solved through `solve` is recorded here together
# with its largest Volterra residual
SOLVED: list[tuple[str, float]] = []


def solve(p: CaputoIVP, cfg: SolverConfig | None = None, mesh=None) -> Trajectory:
    """solve_ivp plus the residual check that applies to every completed trajectory."""
    traj = solve_ivp(p, cfg, mesh)
    if traj.completed:
        r = float(residual_check(traj, p).max())
        SOLVED.append((f"{p.name} alpha={p.alpha} n={traj.times.size - 1}", r))
        assert r <= RESIDUAL_BOUND, f"Volterra residual {r:.3e} for {p.name}"
    return traj
