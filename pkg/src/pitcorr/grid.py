"""Structured grids, hole rasterization and the sparse correction operators.

A field on the grid is stored as an array U whose first axis is x; the
vectorized form stacks columns (Fortran ravel).  On a Dirichlet-Dirichlet axis
of length L with m unknowns the spacing is dr = L/(m+1); each Neumann end
keeps its boundary node as an unknown and enlarges the axis count by one.

Holes ("Theta") are rasterized from geometric primitives into a boolean node
mask.  With M the boundary-condition-modified Kronecker-sum Laplacian, the
correction operators

    N1 = chi_Theta * M * chi_Omega      (Theta rows, Omega columns)
    N2 = M * chi_Theta                  (Theta columns)

yield the masked Laplacian M - N1 - N2 whose Theta rows and columns vanish,
decoupling the holes from the physical region.  N1 is nilpotent of order two
because its rows live on Theta and its columns on Omega.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import DIRICHLET, NEUMANN, Laplacian1D, kronecker_sum, laplacian_1d

__all__ = [
    "GridSpec",
    "Grid",
    "build_grid",
    "Circle",
    "CylinderSegment",
    "RoughEdgeProfile",
    "DomainMask",
    "rasterize_mask",
    "CorrectionOperators",
    "build_correction_matrices",
    "mask_norm_bounds",
]


@dataclass(frozen=True)
class GridSpec:
    """Extents [m], per-axis unknown counts, and per-axis (low, high) bc kinds."""

    extents: tuple
    counts: tuple
    bc: tuple  # per axis: (bc_low, bc_high), entries 'dirichlet' | 'neumann'

    def __post_init__(self):
        if not len(self.extents) == len(self.counts) == len(self.bc) in (2, 3):
            raise ValueError("expected two or three consistent axes")
        for L, m, (lo, hi) in zip(self.extents, self.counts, self.bc):
            if L <= 0.0:
                raise ValueError("extents must be positive")
            if m < 2:
                raise ValueError("need at least two unknowns per axis")
            for end in (lo, hi):
                if end not in (DIRICHLET, NEUMANN):
                    raise ValueError(f"unknown boundary kind {end!r}")


@dataclass(frozen=True)
class Grid:
    spec: GridSpec
    spacings: tuple
    axes: tuple  # per-axis coordinates of the unknown nodes
    laplacians: tuple

    @property
    def counts(self):
        return self.spec.counts

    @property
    def ndim(self):
        return len(self.spec.counts)

    @property
    def n_nodes(self):
        return int(np.prod(self.spec.counts))

    def coordinate_arrays(self):
        """Meshgrid ('ij') coordinate arrays of all unknown nodes."""
        return np.meshgrid(*self.axes, indexing="ij")


def spacing_for_axis(extent: float, count: int, bc_pair) -> float:
    """dr such that count nodes tile the axis under the given end conditions."""
    neumann_ends = sum(1 for end in bc_pair if end == NEUMANN)
    intervals = count + 1 - neumann_ends
    return extent / intervals


def axis_counts_for_spacing(extent: float, dr: float, bc_pair) -> int:
    """Inverse of `spacing_for_axis` for axes whose extent is a multiple of dr."""
    intervals = round(extent / dr)
    if abs(intervals * dr - extent) > 1e-9 * extent:
        raise ValueError("axis extent is not a multiple of the requested spacing")
    neumann_ends = sum(1 for end in bc_pair if end == NEUMANN)
    return intervals - 1 + neumann_ends


def build_grid(spec: GridSpec) -> Grid:
    """Materialize coordinates, spacings and per-axis Laplacians."""
    spacings = []
    axes = []
    laps = []
    for L, m, bc_pair in zip(spec.extents, spec.counts, spec.bc):
        dr = spacing_for_axis(L, m, bc_pair)
        start = 0.0 if bc_pair[0] == NEUMANN else dr
        axes.append(start + dr * np.arange(m))
        spacings.append(dr)
        laps.append(laplacian_1d(bc_pair, m, dr))
    return Grid(spec, tuple(spacings), tuple(axes), tuple(laps))


@dataclass(frozen=True)
class Circle:
    """Closed disk in the (x, y) plane; 3D grids are rejected."""

    center: tuple
    radius: float

    def contains(self, grid: Grid) -> np.ndarray:
        if grid.ndim != 2:
            raise ValueError("circle primitives apply to 2D grids")
        X, Y = grid.coordinate_arrays()
        cx, cy = self.center
        return (X - cx) ** 2 + (Y - cy) ** 2 <= self.radius**2 * (1.0 + 1e-12)

    def snapped(self, grid: Grid) -> "Circle":
        cx = _nearest(grid.axes[0], self.center[0])
        cy = _nearest(grid.axes[1], self.center[1])
        return Circle((cx, cy), self.radius)


@dataclass(frozen=True)
class CylinderSegment:
    """Closed cylinder (optionally clipped) with axis along a grid direction.

    `axis` is the direction of the cylinder axis; `center` gives the two
    coordinates in the perpendicular plane, ordered by increasing axis index.
    `span` optionally clips the extent along the cylinder axis, and
    `half_plane` = (perp_axis, limit) keeps only nodes with that perpendicular
    coordinate <= limit (for semi-cylindrical cavities).
    """

    axis: int
    center: tuple
    radius: float
    span: tuple | None = None
    half_plane: tuple | None = None

    def contains(self, grid: Grid) -> np.ndarray:
        if grid.ndim != 3:
            raise ValueError("cylinder primitives apply to 3D grids")
        coords = grid.coordinate_arrays()
        perp = [i for i in range(3) if i != self.axis]
        r2 = (coords[perp[0]] - self.center[0]) ** 2 + (
            coords[perp[1]] - self.center[1]
        ) ** 2
        inside = r2 <= self.radius**2 * (1.0 + 1e-12)
        if self.span is not None:
            lo, hi = self.span
            inside &= (coords[self.axis] >= lo) & (coords[self.axis] <= hi)
        if self.half_plane is not None:
            ax, limit = self.half_plane
            inside &= coords[ax] <= limit * (1.0 + 1e-12)
        return inside

    def snapped(self, grid: Grid) -> "CylinderSegment":
        perp = [i for i in range(3) if i != self.axis]
        center = tuple(
            _nearest(grid.axes[p], c) for p, c in zip(perp, self.center)
        )
        return CylinderSegment(self.axis, center, self.radius, self.span, self.half_plane)


@dataclass(frozen=True)
class RoughEdgeProfile:
    """Seedable piecewise-linear rough profile carving the high-y edge (2D).

    Knots are spaced `wavelength` apart along x; each knot height is drawn
    uniformly from [base_height - amplitude, base_height] with a deterministic
    generator.  A node belongs to the carved region iff y >= profile(x).
    """

    amplitude: float
    wavelength: float
    base_height: float
    seed: int = 0

    def heights(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n_knots = int(np.floor(x.max() / self.wavelength)) + 2
        rng = np.random.default_rng(self.seed)
        knots_y = self.base_height - self.amplitude * rng.random(n_knots)
        knots_x = self.wavelength * np.arange(n_knots)
        return np.interp(x, knots_x, knots_y)

    def contains(self, grid: Grid) -> np.ndarray:
        if grid.ndim != 2:
            raise ValueError("rough-edge primitives apply to 2D grids")
        X, Y = grid.coordinate_arrays()
        prof = self.heights(grid.axes[0])
        return Y >= prof[:, None] * (1.0 - 1e-12)

    def snapped(self, grid: Grid) -> "RoughEdgeProfile":
        return self


@dataclass
class DomainMask:
    """Node indicator of the holes plus interface classification caches."""

    theta: np.ndarray  # boolean, grid-shaped
    theta_interface: np.ndarray = field(init=False)  # Theta nodes with an Omega neighbor
    omega_interface: np.ndarray = field(init=False)  # Omega nodes with a Theta neighbor

    def __post_init__(self):
        theta = self.theta
        t_if = np.zeros_like(theta)
        o_if = np.zeros_like(theta)
        for ax in range(theta.ndim):
            lo = tuple(
                slice(None) if a != ax else slice(0, -1) for a in range(theta.ndim)
            )
            hi = tuple(
                slice(None) if a != ax else slice(1, None) for a in range(theta.ndim)
            )
            cross = theta[lo] != theta[hi]
            t_if[lo] |= cross & theta[lo]
            t_if[hi] |= cross & theta[hi]
            o_if[lo] |= cross & ~theta[lo]
            o_if[hi] |= cross & ~theta[hi]
        self.theta_interface = t_if
        self.omega_interface = o_if

    @property
    def omega(self) -> np.ndarray:
        return ~self.theta

    def theta_flat(self) -> np.ndarray:
        return self.theta.ravel(order="F")

    def any_theta(self) -> bool:
        return bool(self.theta.any())


def rasterize_mask(grid: Grid, shapes) -> DomainMask:
    """Union of closed shapes; every shape must cover at least one node."""
    theta = np.zeros(grid.counts, dtype=bool)
    for shape in shapes:
        inside = shape.contains(grid)
        if not inside.any():
            raise ValueError(
                f"shape {shape!r} covers no grid node; geometry thinner than the grid"
            )
        theta |= inside
    return DomainMask(theta)


@dataclass(frozen=True)
class CorrectionOperators:
    """Sparse stencil corrections decoupling Theta from the physical region."""

    N1: sp.csr_matrix
    N2: sp.csr_matrix

    @property
    def N12(self) -> sp.csr_matrix:
        return (self.N1 + self.N2).tocsr()


def build_correction_matrices(grid: Grid, mask: DomainMask) -> CorrectionOperators:
    if mask.theta.shape != tuple(grid.counts):
        raise ValueError("mask shape does not match the grid")
    M = kronecker_sum(grid.laplacians)
    theta = mask.theta_flat()
    d_theta = sp.diags(theta.astype(float), format="csr")
    d_omega = sp.diags((~theta).astype(float), format="csr")
    N1 = (d_theta @ M @ d_omega).tocsr()
    N2 = (M @ d_theta).tocsr()
    N1.eliminate_zeros()
    N2.eliminate_zeros()
    return CorrectionOperators(N1, N2)


def mask_norm_bounds(N: sp.spmatrix):
    """Exact (column-sum, row-sum) max-abs norms of a sparse matrix."""
    if N.nnz == 0:
        return 0.0, 0.0
    absN = abs(N)
    norm1 = float(absN.sum(axis=0).max())
    norm_inf = float(absN.sum(axis=1).max())
    return norm1, norm_inf


def _nearest(axis_coords: np.ndarray, value: float) -> float:
    return float(axis_coords[np.argmin(np.abs(axis_coords - value))])
