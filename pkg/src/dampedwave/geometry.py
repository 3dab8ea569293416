"""Domain, grid, and damping-region geometry.

The computational grid is a uniform Cartesian lattice masked to the domain.
Every node is classified exterior / boundary / interior; Dirichlet boundary
nodes carry the value 0 in all field evaluations, and interior nodes are
guaranteed to have their four stencil neighbours inside the closed domain.
Curved (disk) boundaries are handled by node masking, which is first-order
accurate at the boundary; rectangles are exact.

The module also builds the observation geometry used by the multiplier
diagnostics: the illuminated part of the boundary seen from an observation
point x0, epsilon-neighborhoods of it, the coverage check for the damping
region omega, the localization field a(x), and the nested smooth cutoff
fields psi, xi, beta together with the vector field psi(x)(x - x0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

EXTERIOR = 0
BOUNDARY = 1
INTERIOR = 2

_DIVISIBILITY_RTOL = 1e-9


def smoothstep(r):
    """Quintic ramp 6r^5 - 15r^4 + 10r^3, clamped to [0, 1]. C2 at the joints."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    return r * r * r * (10.0 + r * (6.0 * r - 15.0))


@dataclass(frozen=True)
class DomainSpec:
    """Planar domain: an axis-aligned rectangle [0,W]x[0,H] or a disk at the origin."""

    shape: str
    width: float = 0.0
    height: float = 0.0
    radius: float = 0.0

    def __post_init__(self):
        if self.shape == "rectangle":
            if self.width <= 0 or self.height <= 0:
                raise ConfigError("rectangle sides must be positive")
        elif self.shape == "disk":
            if self.radius <= 0:
                raise ConfigError("disk radius must be positive")
        else:
            raise ConfigError(f"unknown domain shape {self.shape!r}")

    @classmethod
    def rectangle(cls, width, height):
        return cls("rectangle", width=float(width), height=float(height))

    @classmethod
    def disk(cls, radius):
        return cls("disk", radius=float(radius))

    @property
    def min_extent(self):
        if self.shape == "rectangle":
            return min(self.width, self.height)
        return 2.0 * self.radius


@dataclass(frozen=True)
class LineSegment:
    """Straight boundary piece with a constant outward unit normal."""

    ax: float
    ay: float
    bx: float
    by: float
    nx: float
    ny: float

    @property
    def midpoint(self):
        return (0.5 * (self.ax + self.bx), 0.5 * (self.ay + self.by))

    @property
    def normal(self):
        return (self.nx, self.ny)

    def distance(self, x, y):
        """Exact point-to-segment distance, vectorized over node coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx, dy = self.bx - self.ax, self.by - self.ay
        L2 = dx * dx + dy * dy
        t = ((x - self.ax) * dx + (y - self.ay) * dy) / L2
        t = np.clip(t, 0.0, 1.0)
        px = self.ax + t * dx
        py = self.ay + t * dy
        return np.hypot(x - px, y - py)


@dataclass(frozen=True)
class ArcSegment:
    """Circular-arc boundary piece; angles in radians, theta0 < theta1."""

    cx: float
    cy: float
    radius: float
    theta0: float
    theta1: float

    @property
    def midpoint(self):
        tm = 0.5 * (self.theta0 + self.theta1)
        return (self.cx + self.radius * math.cos(tm), self.cy + self.radius * math.sin(tm))

    @property
    def normal(self):
        tm = 0.5 * (self.theta0 + self.theta1)
        return (math.cos(tm), math.sin(tm))

    def distance(self, x, y):
        """|rho - R| where the point's angle falls inside the arc, endpoint distance otherwise."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rho = np.hypot(x - self.cx, y - self.cy)
        ang = np.arctan2(y - self.cy, x - self.cx)
        # wrap into [theta0, theta0 + 2*pi)
        ang = self.theta0 + np.mod(ang - self.theta0, 2.0 * math.pi)
        inside = ang <= self.theta1
        d_radial = np.abs(rho - self.radius)
        e0x = self.cx + self.radius * math.cos(self.theta0)
        e0y = self.cy + self.radius * math.sin(self.theta0)
        e1x = self.cx + self.radius * math.cos(self.theta1)
        e1y = self.cy + self.radius * math.sin(self.theta1)
        d_ends = np.minimum(np.hypot(x - e0x, y - e0y), np.hypot(x - e1x, y - e1y))
        return np.where(inside, d_radial, d_ends)


def boundary_segments(domain, spacing=None):
    """Discretize the domain boundary into segments carrying outward normals.

    Rectangle sides are kept whole (the sign test and distances are exact per
    side). Disk boundaries become arcs whose length matches the grid spacing.
    """
    if domain.shape == "rectangle":
        W, H = domain.width, domain.height
        return (
            LineSegment(0.0, 0.0, W, 0.0, 0.0, -1.0),   # bottom
            LineSegment(W, 0.0, W, H, 1.0, 0.0),        # right
            LineSegment(W, H, 0.0, H, 0.0, 1.0),        # top
            LineSegment(0.0, H, 0.0, 0.0, -1.0, 0.0),   # left
        )
    R = domain.radius
    if spacing is None or spacing <= 0:
        n = 256
    else:
        n = max(8, int(round(2.0 * math.pi * R / spacing)))
    edges = np.linspace(0.0, 2.0 * math.pi, n + 1)
    return tuple(ArcSegment(0.0, 0.0, R, float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]))


def gamma_region(domain, x0, spacing=None):
    """Boundary segments illuminated from the observation point x0.

    A segment belongs to the region exactly when (midpoint - x0) . normal >= 0.
    """
    out = []
    for seg in boundary_segments(domain, spacing):
        mx, my = seg.midpoint
        nx, ny = seg.normal
        if (mx - x0[0]) * nx + (my - x0[1]) * ny >= 0.0:
            out.append(seg)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Grid:
    """Masked uniform Cartesian discretization of the domain.

    Attributes:
        h: node spacing (dimensionless length).
        xs, ys: 1-D node coordinate arrays; fields are indexed [ix, iy].
        klass: int8 node classification (EXTERIOR / BOUNDARY / INTERIOR).
        segments: boundary discretization at resolution h, with normals.
    """

    domain: DomainSpec
    h: float
    xs: np.ndarray
    ys: np.ndarray
    klass: np.ndarray
    segments: tuple
    X: np.ndarray
    Y: np.ndarray
    interior: np.ndarray
    in_domain: np.ndarray
    n_interior: int

    @property
    def shape(self):
        return self.klass.shape

    def zeros(self):
        return np.zeros(self.klass.shape, dtype=float)

    def integrate(self, field):
        """Grid-cell quadrature: h^2 times the sum over interior nodes."""
        return self.h * self.h * float(np.sum(np.asarray(field)[self.interior]))

    def norm_l2(self, field):
        f = np.asarray(field, dtype=float)
        return math.sqrt(self.integrate(f * f))


def _lock(arr):
    arr.setflags(write=False)
    return arr


def _classify(inside, on_bnd):
    """Interior nodes are strictly inside with all four neighbours in the closed domain."""
    closed = inside | on_bnd
    nb_ok = np.zeros_like(inside)
    nb_ok[1:-1, 1:-1] = (
        closed[2:, 1:-1] & closed[:-2, 1:-1] & closed[1:-1, 2:] & closed[1:-1, :-2]
    )
    interior = inside & nb_ok
    klass = np.full(inside.shape, EXTERIOR, dtype=np.int8)
    klass[closed] = BOUNDARY
    klass[interior] = INTERIOR
    return klass


def build_grid(domain, spacing):
    """Build the masked grid at the requested node spacing.

    Raises ConfigError when the spacing does not divide rectangle sides, or
    when it is too coarse (fewer than 3 interior nodes along some axis).
    """
    h = float(spacing)
    if h <= 0:
        raise ConfigError("grid spacing must be positive")
    if h > domain.min_extent / 4.0 * (1.0 + _DIVISIBILITY_RTOL):
        raise ConfigError(
            f"spacing {h} too coarse for domain extent {domain.min_extent}"
        )

    if domain.shape == "rectangle":
        nx = int(round(domain.width / h))
        ny = int(round(domain.height / h))
        if abs(nx * h - domain.width) > _DIVISIBILITY_RTOL * max(1.0, domain.width):
            raise ConfigError(f"spacing {h} does not divide width {domain.width}")
        if abs(ny * h - domain.height) > _DIVISIBILITY_RTOL * max(1.0, domain.height):
            raise ConfigError(f"spacing {h} does not divide height {domain.height}")
        xs = np.linspace(0.0, domain.width, nx + 1)
        ys = np.linspace(0.0, domain.height, ny + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        inside = (X > 0) & (X < domain.width) & (Y > 0) & (Y < domain.height)
        on_bnd = ~inside
        klass = _classify(inside, on_bnd)
    else:
        R = domain.radius
        K = int(math.ceil(R / h - _DIVISIBILITY_RTOL))
        xs = np.arange(-K, K + 1, dtype=float) * h
        ys = xs.copy()
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        r2 = X * X + Y * Y
        tol = 1e-9 * R * R
        on_bnd = np.abs(r2 - R * R) <= tol
        inside = (r2 < R * R - tol) & ~on_bnd
        klass = _classify(inside, on_bnd)

    interior = klass == INTERIOR
    n_interior = int(np.count_nonzero(interior))
    if n_interior == 0:
        raise ConfigError("grid has no interior nodes")
    rows = np.count_nonzero(interior, axis=1).max()
    cols = np.count_nonzero(interior, axis=0).max()
    if rows < 3 or cols < 3:
        raise ConfigError(
            f"spacing {h} too coarse: fewer than 3 interior nodes per axis"
        )

    return Grid(
        domain=domain,
        h=h,
        xs=_lock(xs),
        ys=_lock(ys),
        klass=_lock(klass),
        segments=boundary_segments(domain, h),
        X=_lock(X),
        Y=_lock(Y),
        interior=_lock(interior),
        in_domain=_lock(klass != EXTERIOR),
        n_interior=n_interior,
    )


def distance_to_segments(grid, segments):
    """Node-wise Euclidean distance to the nearest point of the segment set."""
    if not segments:
        return np.full(grid.shape, np.inf)
    dist = segments[0].distance(grid.X, grid.Y)
    for seg in segments[1:]:
        dist = np.minimum(dist, seg.distance(grid.X, grid.Y))
    return dist


def epsilon_neighborhood(grid, gamma, eps):
    """Node indicator of {x : dist(x, gamma) <= eps}."""
    if eps <= 0:
        raise ConfigError("epsilon must be positive")
    return distance_to_segments(grid, gamma) <= eps + 1e-12


@dataclass(frozen=True)
class MgcCheck:
    ok: bool
    violations: tuple  # (ix, iy, x, y) per offending node


def check_mgc(omega, gamma, eps, grid):
    """Check that omega covers the eps-neighborhood of gamma inside the domain."""
    needed = epsilon_neighborhood(grid, gamma, eps) & grid.interior
    bad = needed & ~np.asarray(omega, dtype=bool)
    idx = np.argwhere(bad)
    violations = tuple(
        (int(i), int(j), float(grid.xs[i]), float(grid.ys[j])) for i, j in idx
    )
    return MgcCheck(ok=len(violations) == 0, violations=violations)


@dataclass(frozen=True, eq=False)
class MgcRegion:
    """Observation point, illuminated boundary, and the damping region it induces."""

    x0: tuple
    gamma: tuple
    eps: float
    omega: np.ndarray


def build_mgc_region(grid, x0, eps, gamma=None):
    if gamma is None:
        gamma = gamma_region(grid.domain, x0, grid.h)
    omega = epsilon_neighborhood(grid, gamma, eps) & grid.interior
    return MgcRegion(x0=(float(x0[0]), float(x0[1])), gamma=gamma, eps=float(eps), omega=_lock(omega))


@dataclass(frozen=True, eq=False)
class LocalizationField:
    """Damping localization a(x) >= 0 with a >= a0 on the region omega."""

    values: np.ndarray
    omega: np.ndarray
    a0: float
    profile: str
    band: float


def build_localization(omega, a0, profile, grid, band=None):
    """Build a(x) from the damping-region indicator.

    The constant profile is a0 on omega and 0 outside. The indicator-smooth
    profile keeps a = a0 on all omega nodes and ramps to 0 over a band of the
    given width outside omega, using the quintic smoothstep in the node-set
    distance (so the floor a >= a0 on omega is exact).
    """
    if a0 <= 0:
        raise ConfigError("localization floor a0 must be positive")
    omega = np.asarray(omega, dtype=bool)
    if profile == "constant":
        values = np.where(omega, float(a0), 0.0)
        band_used = 0.0
    elif profile == "indicator-smooth":
        if band is None or band <= 0:
            raise ConfigError("indicator-smooth profile needs a positive band width")
        if not omega.any():
            values = np.zeros(omega.shape)
        else:
            from scipy.ndimage import distance_transform_edt

            dist = distance_transform_edt(~omega, sampling=grid.h)
            values = float(a0) * (1.0 - smoothstep(dist / float(band)))
            values[omega] = float(a0)
        band_used = float(band)
    else:
        raise ConfigError(f"unknown localization profile {profile!r}")
    return LocalizationField(
        values=_lock(values), omega=_lock(omega.copy()), a0=float(a0),
        profile=profile, band=band_used,
    )


def default_radii(eps):
    """Equispaced nested radii (eps/4, eps/2, 3eps/4, eps)."""
    return (eps / 4.0, eps / 2.0, 3.0 * eps / 4.0, eps)


@dataclass(frozen=True, eq=False)
class CutoffFields:
    """Nested smooth cutoffs in the distance to the illuminated boundary.

    psi vanishes on the innermost neighborhood Q0 and is 1 outside Q1;
    xi is 1 on Q1 and vanishes outside Q2; beta is 1 on Q2 and vanishes
    outside the eps-neighborhood (hence outside omega). hx, hy are the
    components of the multiplier vector field psi(x)(x - x0).
    """

    psi: np.ndarray
    xi: np.ndarray
    beta: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    radii: tuple
    x0: tuple
    dist: np.ndarray


def build_cutoffs(grid, gamma, radii, x0):
    eps0, eps1, eps2, eps = (float(r) for r in radii)
    if not (0.0 < eps0 < eps1 < eps2 < eps):
        raise ConfigError("cutoff radii must satisfy 0 < eps0 < eps1 < eps2 < eps")
    dist = distance_to_segments(grid, gamma)
    psi = smoothstep((dist - eps0) / (eps1 - eps0))
    xi = 1.0 - smoothstep((dist - eps1) / (eps2 - eps1))
    beta = 1.0 - smoothstep((dist - eps2) / (eps - eps2))
    hx = psi * (grid.X - x0[0])
    hy = psi * (grid.Y - x0[1])
    return CutoffFields(
        psi=_lock(psi), xi=_lock(xi), beta=_lock(beta),
        hx=_lock(hx), hy=_lock(hy),
        radii=(eps0, eps1, eps2, eps), x0=(float(x0[0]), float(x0[1])),
        dist=_lock(dist),
    )


def write_field_csv(path, grid, values):
    """Raster export: row-major x,y,value lines for every grid node."""
    values = np.asarray(values)
    with open(path, "w", encoding="utf-8") as f:
        f.write("x,y,value\n")
        for i, x in enumerate(grid.xs):
            for j, y in enumerate(grid.ys):
                f.write(f"{x:.17g},{y:.17g},{float(values[i, j]):.17g}\n")
