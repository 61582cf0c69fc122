"""IMEX time steppers in Sylvester form on rectangular domains.

Both steppers treat diffusion implicitly and the reaction explicitly, with the
stiff phi reaction relaxed by a shift w (applied to the phi equation only):

IMEX Euler
    ((1+w*dt)I + bphi*Mx) Phi1 + bphi*Phi1*My^T
        = Phi0 + dt*(D_phi*Psi_phi(t1) + w*Phi0 + F1(Phi0, C0)),
    (I + bc*Mx) C1 + bc*C1*My^T
        = C0 + dt*D_c*(Lap F2(Phi1) + Psi_c(t1) + Psi_F2(t1)),

with bphi = -dt*D_phi and bc = -dt*D_c; the c step consumes the freshly
computed Phi1.  The two-step second-order scheme (2SBDF) combines levels n and
n+1 with the shifts (3+2*w*dt, -2*dt*D_phi) and (3, -2*dt*D_c), and is
bootstrapped from fine IMEX Euler substeps up to t = dt.

Psi terms collect the known Dirichlet boundary values scaled by 1/dr^2 on the
adjacent interior layer; Neumann edges contribute nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .linalg import DIRICHLET, apply_laplacian, build_operator
from .model import CorrosionParameters, reaction_f1, reaction_f2

__all__ = [
    "FieldPair",
    "SchemeConfig",
    "BoundaryData",
    "boundary_contribution",
    "RectOperators",
    "build_rect_operators",
    "step_imex_euler_rect",
    "step_imex_2sbdf_rect",
    "bootstrap_2sbdf",
    "run_rect",
    "InstabilityError",
]

EULER = "euler"
TWO_SBDF = "2sbdf"


class InstabilityError(RuntimeError):
    """The solution left the representable range (NaN/Inf): dt too large or w too small."""


@dataclass(frozen=True)
class FieldPair:
    """The (Phi, C) grid state at one time level."""

    Phi: np.ndarray
    C: np.ndarray
    t: float = 0.0
    step_index: int = 0

    def validate(self):
        if self.Phi.shape != self.C.shape:
            raise ValueError("Phi and C must share dimensions")
        if not (np.isfinite(self.Phi).all() and np.isfinite(self.C).all()):
            raise InstabilityError(
                f"non-finite field values at t={self.t:.6g}s (step {self.step_index})"
            )


@dataclass(frozen=True)
class SchemeConfig:
    order: str  # 'euler' | '2sbdf'
    dt: float
    w: float

    def __post_init__(self):
        if self.order not in (EULER, TWO_SBDF):
            raise ValueError(f"unknown scheme order {self.order!r}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.w < 0.0:
            raise ValueError("w must be nonnegative")


@dataclass(frozen=True)
class BoundaryData:
    """Per-axis (low, high) Dirichlet values for phi and c.

    Values may be scalars or callables of time; entries on Neumann ends are
    ignored.  Defaults to homogeneous data on every Dirichlet edge.
    """

    phi: tuple = ()
    c: tuple = ()

    @staticmethod
    def homogeneous(ndim: int) -> "BoundaryData":
        zeros = tuple((0.0, 0.0) for _ in range(ndim))
        return BoundaryData(zeros, zeros)

    def values_for(self, which: str):
        return self.phi if which == "phi" else self.c


def _edge_value(raw, t: float) -> float:
    return float(raw(t)) if callable(raw) else float(raw)


def boundary_contribution(grid, bdata: BoundaryData, which: str, t: float,
                          params: CorrosionParameters | None = None) -> np.ndarray:
    """Stencil load of the known Dirichlet boundary values.

    which='phi'/'c' inserts the boundary values themselves; which='F2' maps
    the phi boundary values through the nonlinear flux F2 (hence `params`).
    """
    if which not in ("phi", "c", "F2"):
        raise ValueError(f"unknown boundary contribution kind {which!r}")
    field = "phi" if which == "F2" else which
    values = bdata.values_for(field)
    psi = np.zeros(grid.counts)
    if not values:
        return psi
    for ax, (lap, (low_raw, high_raw)) in enumerate(zip(grid.laplacians, values)):
        inv2 = 1.0 / grid.spacings[ax] ** 2
        for end, raw in (("low", low_raw), ("high", high_raw)):
            bc_kind = lap.bc_low if end == "low" else lap.bc_high
            if bc_kind != DIRICHLET:
                continue
            v = _edge_value(raw, t)
            if which == "F2":
                v = float(reaction_f2(v, params))
            if v == 0.0:
                continue
            idx = [slice(None)] * grid.ndim
            idx[ax] = 0 if end == "low" else grid.counts[ax] - 1
            psi[tuple(idx)] += v * inv2
    return psi


@dataclass(frozen=True)
class RectOperators:
    """The two shifted Sylvester solvers shared by every step of a run."""

    phi: object
    c: object
    grid: object
    params: CorrosionParameters
    cfg: SchemeConfig


def build_rect_operators(grid, cfg: SchemeConfig, params: CorrosionParameters) -> RectOperators:
    """Factorize once per (grid, scheme, steps); reused across the time loop."""
    if cfg.order == EULER:
        a_phi, b_phi = 1.0 + cfg.w * cfg.dt, -cfg.dt * params.D_phi
        a_c, b_c = 1.0, -cfg.dt * params.D_c
    else:
        a_phi, b_phi = 3.0 + 2.0 * cfg.w * cfg.dt, -2.0 * cfg.dt * params.D_phi
        a_c, b_c = 3.0, -2.0 * cfg.dt * params.D_c
    return RectOperators(
        phi=build_operator(a_phi, b_phi, grid.laplacians),
        c=build_operator(a_c, b_c, grid.laplacians),
        grid=grid,
        params=params,
        cfg=cfg,
    )


def step_imex_euler_rect(state: FieldPair, ops: RectOperators,
                         bdata: BoundaryData) -> FieldPair:
    cfg, p, grid = ops.cfg, ops.params, ops.grid
    dt, w = cfg.dt, cfg.w
    t1 = state.t + dt

    psi_phi = boundary_contribution(grid, bdata, "phi", t1)
    rhs_phi = state.Phi + dt * (
        p.D_phi * psi_phi + w * state.Phi + reaction_f1(state.Phi, state.C, p)
    )
    phi1 = ops.phi.solve(rhs_phi)

    psi_c = boundary_contribution(grid, bdata, "c", t1)
    psi_f2 = boundary_contribution(grid, bdata, "F2", t1, p)
    lap_f2 = apply_laplacian(grid.laplacians, reaction_f2(phi1, p))
    rhs_c = state.C + dt * p.D_c * (lap_f2 + psi_c + psi_f2)
    c1 = ops.c.solve(rhs_c)

    out = FieldPair(phi1, c1, t1, state.step_index + 1)
    out.validate()
    return out


def step_imex_2sbdf_rect(prev: FieldPair, curr: FieldPair, ops: RectOperators,
                         bdata: BoundaryData) -> FieldPair:
    cfg, p, grid = ops.cfg, ops.params, ops.grid
    dt, w = cfg.dt, cfg.w
    if abs((prev.t + dt) - curr.t) > 1e-9 * max(dt, abs(curr.t)):
        raise ValueError("2SBDF needs two states one dt apart")
    t2 = curr.t + dt

    psi_phi = boundary_contribution(grid, bdata, "phi", t2)
    rhs_phi = (
        4.0 * curr.Phi
        - prev.Phi
        + 2.0 * dt * (
            2.0 * reaction_f1(curr.Phi, curr.C, p)
            + 2.0 * w * curr.Phi
            - reaction_f1(prev.Phi, prev.C, p)
            - w * prev.Phi
        )
        + 2.0 * dt * p.D_phi * psi_phi
    )
    phi2 = ops.phi.solve(rhs_phi)

    psi_c = boundary_contribution(grid, bdata, "c", t2)
    psi_f2 = boundary_contribution(grid, bdata, "F2", t2, p)
    lap_f2 = apply_laplacian(grid.laplacians, reaction_f2(phi2, p))
    rhs_c = (
        4.0 * curr.C - prev.C + 2.0 * dt * p.D_c * (lap_f2 + psi_c + psi_f2)
    )
    c2 = ops.c.solve(rhs_c)

    out = FieldPair(phi2, c2, t2, curr.step_index + 1)
    out.validate()
    return out


def bootstrap_substeps(dt: float):
    """(count, substep): ceil(4/dt) fine Euler steps summing exactly to dt."""
    count = max(1, math.ceil(4.0 / dt))
    return count, dt / count


def bootstrap_2sbdf(state0: FieldPair, cfg: SchemeConfig,
                    params: CorrosionParameters, grid,
                    bdata: BoundaryData):
    """Produce the second 2SBDF starting value by fine IMEX Euler substeps."""
    count, sub_dt = bootstrap_substeps(cfg.dt)
    sub_cfg = SchemeConfig(EULER, sub_dt, cfg.w)
    sub_ops = build_rect_operators(grid, sub_cfg, params)
    state = state0
    for _ in range(count):
        state = step_imex_euler_rect(state, sub_ops, bdata)
    state = replace(state, t=state0.t + cfg.dt, step_index=state0.step_index + 1)
    return state0, state


def run_rect(state0: FieldPair, cfg: SchemeConfig, params: CorrosionParameters,
             grid, bdata: BoundaryData, horizon: float, hooks=()):
    """Advance to `horizon` (a step multiple), factorizing once up front.

    `hooks` are callables invoked with each completed state, including the
    initial one.
    """
    n_steps = round(horizon / cfg.dt)
    if abs(n_steps * cfg.dt - horizon) > 1e-12 * max(1.0, horizon):
        raise ValueError("horizon must be an integer multiple of dt")
    state0.validate()
    for hook in hooks:
        hook(state0)
    if n_steps == 0:
        return state0

    ops = build_rect_operators(grid, cfg, params)
    if cfg.order == EULER:
        state = state0
        for _ in range(n_steps):
            state = step_imex_euler_rect(state, ops, bdata)
            for hook in hooks:
                hook(state)
        return state

    prev, curr = bootstrap_2sbdf(state0, cfg, params, grid, bdata)
    for hook in hooks:
        hook(curr)
    for _ in range(n_steps - 1):
        prev, curr = curr, step_imex_2sbdf_rect(prev, curr, ops, bdata)
        for hook in hooks:
            hook(curr)
    return curr
