"""Random non-periodic perforations of a planar base domain.

A perforation is a family of small cavities of diameter ~ eps*eta placed so
that guard balls of radius R3*eps around the cavity centers are pairwise
disjoint and keep clear of the outer boundary.  Cavity shapes are disks or
smooth star-shaped profiles rho(theta); every shape is pinched between an
inner ball of radius R1 and the ball of radius R2 about its local origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, PackingInfeasibleError

# Relative tolerance for geometric comparisons; far below any mesh scale.
GEOM_RTOL = 1e-12

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# base domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    """Base domain: an axis-aligned rectangle or a disk."""

    kind: str                      # "disk" | "rectangle"
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    corners: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)  # x0,y0,x1,y1

    def __post_init__(self):
        if self.kind == "disk":
            if self.radius <= 0:
                raise GeometryError("disk radius must be positive")
        elif self.kind == "rectangle":
            x0, y0, x1, y1 = self.corners
            if not (x1 > x0 and y1 > y0):
                raise GeometryError("rectangle sides must have positive length")
        else:
            raise GeometryError(f"unknown domain kind {self.kind!r}")

    @staticmethod
    def rectangle(x0, y0, x1, y1) -> "DomainSpec":
        return DomainSpec(kind="rectangle", corners=(float(x0), float(y0), float(x1), float(y1)))

    @staticmethod
    def unit_square() -> "DomainSpec":
        return DomainSpec.rectangle(0.0, 0.0, 1.0, 1.0)

    @staticmethod
    def disk(center=(0.0, 0.0), radius=1.0) -> "DomainSpec":
        return DomainSpec(kind="disk", center=(float(center[0]), float(center[1])),
                          radius=float(radius))

    def area(self) -> float:
        if self.kind == "disk":
            return math.pi * self.radius ** 2
        x0, y0, x1, y1 = self.corners
        return (x1 - x0) * (y1 - y0)

    def bounding_box(self):
        if self.kind == "disk":
            cx, cy = self.center
            r = self.radius
            return (cx - r, cy - r, cx + r, cy + r)
        return self.corners

    def contains(self, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Vectorized membership with a clearance ``margin`` from the boundary."""
        pts = np.atleast_2d(pts)
        if self.kind == "disk":
            d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
            return d <= self.radius - margin
        x0, y0, x1, y1 = self.corners
        return ((pts[:, 0] >= x0 + margin) & (pts[:, 0] <= x1 - margin)
                & (pts[:, 1] >= y0 + margin) & (pts[:, 1] <= y1 - margin))

    def boundary_distance(self, pts: np.ndarray) -> np.ndarray:
        """Distance to the boundary, positive inside."""
        pts = np.atleast_2d(pts)
        if self.kind == "disk":
            d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
            return self.radius - d
        x0, y0, x1, y1 = self.corners
        return np.minimum.reduce([pts[:, 0] - x0, x1 - pts[:, 0],
                                  pts[:, 1] - y0, y1 - pts[:, 1]])

    def to_dict(self) -> dict:
        if self.kind == "disk":
            return {"kind": "disk", "center": list(self.center), "radius": self.radius}
        return {"kind": "rectangle", "corners": list(self.corners)}

    @staticmethod
    def from_dict(d: dict) -> "DomainSpec":
        if d["kind"] == "disk":
            return DomainSpec.disk(tuple(d["center"]), d["radius"])
        return DomainSpec.rectangle(*d["corners"])


# ---------------------------------------------------------------------------
# cavity shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StarProfile:
    """Smooth 2*pi-periodic radius function given by a finite cosine/sine series.

    rho(theta) = cos_coeffs[0] + sum_m cos_coeffs[m] cos(m theta)
                                + sin_coeffs[m] sin(m theta)
    """

    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...]   # sin_coeffs[0] unused, kept for alignment

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.cos_coeffs[0])
        for m in range(1, len(self.cos_coeffs)):
            r = r + self.cos_coeffs[m] * np.cos(m * theta)
        for m in range(1, len(self.sin_coeffs)):
            r = r + self.sin_coeffs[m] * np.sin(m * theta)
        return r

    def deriv(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.zeros_like(theta)
        for m in range(1, len(self.cos_coeffs)):
            r = r - m * self.cos_coeffs[m] * np.sin(m * theta)
        for m in range(1, len(self.sin_coeffs)):
            r = r + m * self.sin_coeffs[m] * np.cos(m * theta)
        return r

    def deriv_bound(self) -> float:
        """Upper bound for sup |rho'|."""
        b = 0.0
        for m in range(1, len(self.cos_coeffs)):
            b += m * abs(self.cos_coeffs[m])
        for m in range(1, len(self.sin_coeffs)):
            b += m * abs(self.sin_coeffs[m])
        return b

    def rotated(self, phase: float) -> "StarProfile":
        """Profile of the shape rotated by ``phase``."""
        n = max(len(self.cos_coeffs), len(self.sin_coeffs))
        ac = list(self.cos_coeffs) + [0.0] * (n - len(self.cos_coeffs))
        bs = list(self.sin_coeffs) + [0.0] * (n - len(self.sin_coeffs))
        nc, ns = [ac[0]], [0.0]
        for m in range(1, n):
            # rho(theta - phase)
            nc.append(ac[m] * math.cos(m * phase) - bs[m] * math.sin(m * phase))
            ns.append(bs[m] * math.cos(m * phase) + ac[m] * math.sin(m * phase))
        return StarProfile(tuple(nc), tuple(ns))

    @staticmethod
    def from_callable(fn, n_modes: int = 16, n_samples: int = 256) -> "StarProfile":
        """Fit a trigonometric series to an arbitrary smooth profile."""
        theta = np.arange(n_samples) * (_TWO_PI / n_samples)
        vals = np.asarray(fn(theta), dtype=float)
        freq = np.fft.rfft(vals) / n_samples
        n_modes = min(n_modes, len(freq) - 1)
        cos_c = [float(freq[0].real)]
        sin_c = [0.0]
        for m in range(1, n_modes + 1):
            cos_c.append(float(2.0 * freq[m].real))
            sin_c.append(float(-2.0 * freq[m].imag))
        return StarProfile(tuple(cos_c), tuple(sin_c))


@dataclass(frozen=True)
class CavityShape:
    """Reference cavity shape in local coordinates (before the eps*eta scaling).

    Restricting to disks and star-shaped radial profiles keeps the complement
    of the shape inside its outer ball connected automatically and guarantees
    the uniform boundary regularity the rest of the pipeline assumes.
    """

    kind: str                                   # "unit_disk" | "star"
    radial_profile: StarProfile | None = None   # star kind only
    inner_radius: float = 0.5                   # ball of this radius around inner_center fits inside
    outer_radius: float = 1.0                   # shape contained in this ball about the origin
    inner_center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("unit_disk", "star"):
            raise GeometryError(f"unknown cavity shape kind {self.kind!r}")
        if self.kind == "star" and self.radial_profile is None:
            raise GeometryError("star shape requires a radial profile")

    def radius_at(self, theta):
        if self.kind == "unit_disk":
            return np.ones_like(np.asarray(theta, dtype=float))
        return self.radial_profile(theta)

    def max_radius(self, n_samples: int = 720) -> float:
        if self.kind == "unit_disk":
            return 1.0
        theta = np.linspace(0.0, _TWO_PI, n_samples, endpoint=False)
        return float(np.max(self.radial_profile(theta)))

    def deriv_bound(self) -> float:
        if self.kind == "unit_disk":
            return 0.0
        return self.radial_profile.deriv_bound()

    def perimeter(self, n_samples: int = 2048) -> float:
        """Arc length of the unit-scale boundary (trapezoid rule on the angle)."""
        if self.kind == "unit_disk":
            return _TWO_PI
        theta = np.arange(n_samples) * (_TWO_PI / n_samples)
        rho = self.radial_profile(theta)
        drho = self.radial_profile.deriv(theta)
        return float(np.sum(np.hypot(rho, drho)) * (_TWO_PI / n_samples))

    def area(self, n_samples: int = 2048) -> float:
        if self.kind == "unit_disk":
            return math.pi
        theta = np.arange(n_samples) * (_TWO_PI / n_samples)
        rho = self.radial_profile(theta)
        return float(0.5 * np.sum(rho ** 2) * (_TWO_PI / n_samples))

    def to_dict(self) -> dict:
        if self.kind == "unit_disk":
            return {"kind": "unit_disk"}
        return {"kind": "star",
                "fourier_or_samples": {"cos": list(self.radial_profile.cos_coeffs),
                                       "sin": list(self.radial_profile.sin_coeffs)}}

    @staticmethod
    def from_dict(d: dict, inner_radius: float, outer_radius: float) -> "CavityShape":
        if d["kind"] == "unit_disk":
            return CavityShape("unit_disk", None, inner_radius, outer_radius)
        enc = d["fourier_or_samples"]
        if "cos" in enc:
            profile = StarProfile(tuple(enc["cos"]), tuple(enc["sin"]))
        else:
            samples = np.asarray(enc["samples"], dtype=float)
            profile = StarProfile.from_callable(
                lambda th: np.interp(th % _TWO_PI,
                                     np.linspace(0, _TWO_PI, len(samples), endpoint=False),
                                     samples, period=_TWO_PI))
        return CavityShape("star", profile, inner_radius, outer_radius)


def unit_disk_shape(inner_radius: float = 0.5, outer_radius: float = 1.0) -> CavityShape:
    return CavityShape("unit_disk", None, inner_radius, outer_radius)


def star_shape(cos_coeffs, sin_coeffs=None, inner_radius: float = 0.5,
               outer_radius: float = 1.0) -> CavityShape:
    if sin_coeffs is None:
        sin_coeffs = (0.0,) * len(tuple(cos_coeffs))
    return CavityShape("star", StarProfile(tuple(cos_coeffs), tuple(sin_coeffs)),
                       inner_radius, outer_radius)


# Default three-lobed profile, rho in [0.7, 0.9]: safely between R1=0.5 and R2=1.
DEFAULT_STAR = star_shape((0.8, 0.0, 0.0, 0.1))


# ---------------------------------------------------------------------------
# perforation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cavity:
    center: tuple[float, float]
    shape: CavityShape


@dataclass(frozen=True)
class Region:
    """Point-membership predicate plus a polygonal boundary sampler."""

    membership: object           # callable (N,2) -> bool array
    boundary_polygon: object     # callable (resolution) -> (m,2) vertices


@dataclass(frozen=True)
class Perforation:
    """Geometric state of the perforated domain."""

    domain: DomainSpec
    epsilon: float
    eta: float
    radii: tuple[float, float, float]       # (R1, R2, R3)
    cavities: tuple[Cavity, ...] = field(default_factory=tuple)

    def __post_init__(self):
        r1, r2, r3 = self.radii
        if not (r1 < r2 < r3):
            raise GeometryError("radii must satisfy R1 < R2 < R3")
        if not (0 < self.epsilon):
            raise GeometryError("epsilon must be positive")
        if not (0 < self.eta <= 1):
            raise GeometryError("eta must lie in (0, 1]")

    @property
    def scale(self) -> float:
        """Linear scale eps*eta of the cavities."""
        return self.epsilon * self.eta

    @property
    def guard_radius(self) -> float:
        return self.radii[2] * self.epsilon

    def centers(self) -> np.ndarray:
        if not self.cavities:
            return np.zeros((0, 2))
        return np.array([c.center for c in self.cavities], dtype=float)

    def scaled_cavity(self, k: int) -> Region:
        """Cavity k mapped to physical coordinates: x in cavity iff (x-M_k)/(eps*eta) is in the shape."""
        if not (0 <= k < len(self.cavities)):
            raise IndexError(f"cavity index {k} out of range")
        cav = self.cavities[k]
        cx, cy = cav.center
        s = self.scale

        def membership(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            dx = (pts[:, 0] - cx) / s
            dy = (pts[:, 1] - cy) / s
            r = np.hypot(dx, dy)
            theta = np.arctan2(dy, dx)
            # boundary-inclusive up to relative rounding slack
            return r <= cav.shape.radius_at(theta) * (1.0 + GEOM_RTOL)

        def boundary_polygon(resolution: int = 64):
            theta = np.arange(resolution) * (_TWO_PI / resolution)
            rho = cav.shape.radius_at(theta) * s
            return np.column_stack([cx + rho * np.cos(theta), cy + rho * np.sin(theta)])

        return Region(membership, boundary_polygon)

    def packing_bound(self) -> int:
        """Area-based cap on how many disjoint guard balls fit in the domain."""
        return int(math.floor(self.domain.area() / (math.pi * self.guard_radius ** 2)))

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "epsilon": self.epsilon,
            "eta": self.eta,
            "radii": list(self.radii),
            "cavities": [{"center": list(c.center), "shape": c.shape.to_dict()}
                         for c in self.cavities],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @staticmethod
    def from_dict(d: dict) -> "Perforation":
        r1, r2, r3 = d["radii"]
        cavities = tuple(
            Cavity(tuple(c["center"]), CavityShape.from_dict(c["shape"], r1, r2))
            for c in d["cavities"])
        return Perforation(DomainSpec.from_dict(d["domain"]), d["epsilon"], d["eta"],
                           (r1, r2, r3), cavities)

    @staticmethod
    def from_json(src) -> "Perforation":
        if isinstance(src, (str, bytes)) and "{" in str(src):
            return Perforation.from_dict(json.loads(src))
        with open(src) as fh:
            return Perforation.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# generation: dart throwing with a minimum center distance of 2*R3*eps
# ---------------------------------------------------------------------------

_SHAPE_PRESETS = {
    "unit_disk": lambda r1, r2, rng: unit_disk_shape(r1, r2),
    # disk of half the reference radius, as a constant star profile: smaller
    # cavities relative to the guard scale, useful for dense sweeps
    "small_disk": lambda r1, r2, rng: star_shape((0.5,), inner_radius=r1, outer_radius=r2),
    "star": lambda r1, r2, rng: CavityShape(
        "star", DEFAULT_STAR.radial_profile.rotated(float(rng.uniform(0.0, _TWO_PI))),
        r1, r2),
}


def generate_perforation(domain: DomainSpec, epsilon: float, eta: float,
                         radii: tuple[float, float, float],
                         target_count="fill", seed: int = 0,
                         shapes: tuple[str, ...] = ("unit_disk",)) -> Perforation:
    """Sample cavity centers by seeded rejection (dart throwing).

    Accepted centers keep pairwise distance >= 2*R3*eps and clearance R3*eps
    from the outer boundary; both hold exactly by construction.  With
    ``target_count="fill"`` sampling stops after ``10 * packing_bound``
    consecutive rejections; an integer ``target_count`` that provably exceeds
    the packing bound raises :class:`PackingInfeasibleError`.
    """
    r1, r2, r3 = radii
    if not (r1 < r2 < r3):
        raise GeometryError("radii must satisfy R1 < R2 < R3")
    if not (0 < epsilon <= 1 and 0 < eta <= 1):
        raise GeometryError("epsilon and eta must lie in (0, 1]")

    guard = r3 * epsilon
    skeleton = Perforation(domain, epsilon, eta, radii)
    bound = skeleton.packing_bound()
    fill = target_count == "fill"
    if not fill:
        target = int(target_count)
        if target < 0:
            raise GeometryError("target_count must be nonnegative")
        if target > bound:
            raise PackingInfeasibleError(
                f"requested {target} cavities but at most {bound} guard balls of radius "
                f"{guard:.6g} fit in a domain of area {domain.area():.6g}")
        if target == 0:
            return skeleton

    rng = np.random.default_rng(seed)
    min_dist = 2.0 * guard
    cell = min_dist / math.sqrt(2.0)
    x0, y0, x1, y1 = domain.bounding_box()
    # eligible band for centers: clearance guard from the outer boundary
    ex0, ey0, ex1, ey1 = x0 + guard, y0 + guard, x1 - guard, y1 - guard
    if ex0 >= ex1 or ey0 >= ey1:
        if fill:
            return skeleton
        raise PackingInfeasibleError(
            f"no interior point keeps clearance {guard:.6g} from the boundary")

    grid: dict[tuple[int, int], int] = {}
    accepted: list[np.ndarray] = []

    def fits(p) -> bool:
        ix, iy = int((p[0] - ex0) / cell), int((p[1] - ey0) / cell)
        for jx in range(ix - 2, ix + 3):
            for jy in range(iy - 2, iy + 3):
                idx = grid.get((jx, jy))
                if idx is not None:
                    q = accepted[idx]
                    if (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 < min_dist ** 2:
                        return False
        return True

    cap = 10 * max(bound, 1)
    rejections = 0
    batch = 256
    while rejections < cap and (fill or len(accepted) < target):
        cand = np.column_stack([rng.uniform(ex0, ex1, batch), rng.uniform(ey0, ey1, batch)])
        if domain.kind == "disk":
            ok = domain.boundary_distance(cand) >= guard
        else:
            ok = np.ones(batch, dtype=bool)
        for p, valid in zip(cand, ok):
            if not fill and len(accepted) >= target:
                break
            if valid and fits(p):
                grid[(int((p[0] - ex0) / cell), int((p[1] - ey0) / cell))] = len(accepted)
                accepted.append(p)
                rejections = 0
            else:
                rejections += 1
                if rejections >= cap:
                    break

    if not fill and len(accepted) < target:
        raise PackingInfeasibleError(
            f"placed only {len(accepted)} of {target} cavities after {cap} consecutive "
            f"rejections; the request is too dense for guard radius {guard:.6g}")

    presets = [_SHAPE_PRESETS[name] for name in shapes]
    cavities = []
    for p in accepted:
        make = presets[int(rng.integers(0, len(presets)))] if len(presets) > 1 else presets[0]
        cavities.append(Cavity((float(p[0]), float(p[1])), make(r1, r2, rng)))
    return Perforation(domain, epsilon, eta, radii, tuple(cavities))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    """List of violated admissibility conditions; empty means valid."""

    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return not self.violations

    def __iter__(self):
        return iter(self.violations)


def validate_a1(p: Perforation, angular_samples: int = 512) -> ValidationReport:
    """Check every admissibility condition the generator guarantees.

    Violations are reported as data, not raised.  Shape conditions are tested
    by sampling the radial profile on a fine angular grid.
    """
    out = ValidationReport()
    r1, r2, r3 = p.radii
    tol = GEOM_RTOL * max(1.0, r2)

    if not (r1 < r2 < r3):
        out.violations.append(f"radii ordering violated: R1={r1}, R2={r2}, R3={r3}")
    if not (0 < p.epsilon):
        out.violations.append(f"epsilon out of range: {p.epsilon}")
    if not (0 < p.eta <= 1):
        out.violations.append(f"eta out of range: {p.eta}")

    centers = p.centers()
    n = len(centers)
    guard = p.guard_radius

    if n:
        d2 = np.sum((centers[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        iu = np.triu_indices(n, 1)
        bad = np.flatnonzero(d2[iu] < (2.0 * guard) ** 2 * (1.0 - GEOM_RTOL))
        for b in bad:
            k, j = iu[0][b], iu[1][b]
            out.violations.append(
                f"guard-ball overlap (k={k},j={j}): |M_k-M_j|={math.sqrt(d2[k, j]):.6g} "
                f"< {2 * guard:.6g}")

        clearance = p.domain.boundary_distance(centers)
        for k in np.flatnonzero(clearance < guard * (1.0 - GEOM_RTOL)):
            out.violations.append(
                f"boundary clearance (k={k}): dist={clearance[k]:.6g} < {guard:.6g}")

    theta = np.arange(angular_samples) * (_TWO_PI / angular_samples)
    for k, cav in enumerate(p.cavities):
        rho = np.asarray(cav.shape.radius_at(theta), dtype=float)
        yx, yy = cav.shape.inner_center
        ynorm = math.hypot(yx, yy)
        if np.any(rho > cav.shape.outer_radius + tol):
            out.violations.append(
                f"outer containment (k={k}): max rho={rho.max():.6g} > R2={cav.shape.outer_radius}")
        if np.any(rho - ynorm < cav.shape.inner_radius - tol):
            out.violations.append(
                f"inner ball (k={k}): min rho-|y|={(rho - ynorm).min():.6g} "
                f"< R1={cav.shape.inner_radius}")
        if cav.shape.kind == "star":
            drho = np.diff(np.concatenate([rho, rho[:1]])) / (_TWO_PI / angular_samples)
            declared = cav.shape.deriv_bound()
            if np.any(np.abs(drho) > declared + 1e-6 + 0.05 * declared):
                out.violations.append(
                    f"profile derivative (k={k}): finite-difference slope "
                    f"{np.abs(drho).max():.6g} exceeds declared bound {declared:.6g}")
    return out
