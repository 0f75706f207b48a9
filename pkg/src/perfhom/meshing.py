"""Conforming triangulations of the base domain with and without cavities.

Meshes are built from structured point clouds: a hexagonal (or rectangular)
far-field lattice at target edge length h, plus graded rings of points around
every cavity whose spacing starts at min(h, eps*eta/4) on the cavity boundary
and grows geometrically until it matches the far field.  The Delaunay
triangulation of such a cloud conforms to the cavity boundary polygons; this
is verified explicitly and a finer ring layout is retried once on failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import MeshingError, TransferError
from .geometry import DomainSpec, Perforation

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# mesh container
# ---------------------------------------------------------------------------

@dataclass
class Mesh:
    """Triangulation with tagged boundary edges.

    boundary_tags: 0 = outer boundary, k+1 = boundary of cavity k.
    Triangles are counterclockwise (positive signed area).
    """

    vertices: np.ndarray        # (N, 2) float
    triangles: np.ndarray       # (M, 3) int
    boundary_edges: np.ndarray  # (B, 2) int
    boundary_tags: np.ndarray   # (B,)  int
    h_max: float

    _areas: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64)
        self.boundary_tags = np.ascontiguousarray(self.boundary_tags, dtype=np.int64)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self):
        """Vertex coordinates per triangle: three (M,2) arrays."""
        v = self.vertices
        t = self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def signed_areas(self) -> np.ndarray:
        a, b, c = self.corners()
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def areas(self) -> np.ndarray:
        if self._areas is None:
            self._areas = self.signed_areas()
        return self._areas

    def area(self) -> float:
        return float(np.sum(self.areas()))

    def centroids(self) -> np.ndarray:
        a, b, c = self.corners()
        return (a + b + c) / 3.0

    def edge_lengths(self) -> np.ndarray:
        a, b, c = self.corners()
        return np.column_stack([np.hypot(*(b - c).T), np.hypot(*(c - a).T),
                                np.hypot(*(a - b).T)])

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        ell = np.sort(self.edge_lengths(), axis=1)
        # smallest angle is opposite the shortest edge
        cosv = (ell[:, 1] ** 2 + ell[:, 2] ** 2 - ell[:, 0] ** 2) / (2 * ell[:, 1] * ell[:, 2])
        return float(np.degrees(np.arccos(np.clip(cosv, -1.0, 1.0)).min()))

    def boundary_vertex_set(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def cavity_edge_count(self, k: int) -> int:
        return int(np.count_nonzero(self.boundary_tags == k + 1))

    def outer_vertex_indices(self) -> np.ndarray:
        if len(self.boundary_edges) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self.boundary_edges[self.boundary_tags == 0])

    def cavity_polygon(self, k: int) -> np.ndarray:
        """Ordered vertex loop of cavity k's tagged edges (edge orientation in
        storage is arbitrary, so the loop is recovered from adjacency)."""
        edges = self.boundary_edges[self.boundary_tags == k + 1]
        if len(edges) == 0:
            raise IndexError(f"no boundary edges tagged for cavity {k}")
        adj: dict[int, list[int]] = {}
        for i, j in edges:
            adj.setdefault(int(i), []).append(int(j))
            adj.setdefault(int(j), []).append(int(i))
        start = int(edges[0, 0])
        loop = [start]
        prev, cur = -1, start
        while len(loop) <= len(edges):
            nbrs = adj[cur]
            nxt = nbrs[0] if nbrs[0] != prev else nbrs[-1]
            if nxt == start:
                break
            loop.append(nxt)
            prev, cur = cur, nxt
        return np.asarray(loop, dtype=np.int64)

    def validate(self) -> list[str]:
        """Structural invariants; empty list means the mesh is consistent."""
        problems = []
        if np.any(self.signed_areas() <= 0):
            problems.append("triangle with nonpositive signed area")
        counts = _edge_counts(self.triangles)
        if np.any(counts[0][counts[1] > 2]):
            problems.append("edge shared by more than two triangles")
        bset = {tuple(e) for e in np.sort(self.boundary_edges, axis=1)}
        once = {tuple(e) for e, c in zip(counts[0], counts[1]) if c == 1}
        if bset != once:
            problems.append("tagged boundary edges do not match single-triangle edges")
        if len(self.edge_lengths()) and self.edge_lengths().max() > self.h_max * (1 + 1e-12):
            problems.append("h_max smaller than the longest edge")
        return problems


@dataclass
class DiscreteFunction:
    """Nodal (vertex) values of a piecewise-linear function on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ValueError("value count must equal vertex count")


def _edge_counts(triangles: np.ndarray):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0, return_counts=True)


# ---------------------------------------------------------------------------
# point-cloud construction
# ---------------------------------------------------------------------------

def _hex_lattice(bbox, h):
    x0, y0, x1, y1 = bbox
    dy = h * math.sqrt(3.0) / 2.0
    rows = int(math.ceil((y1 - y0) / dy)) + 1
    cols = int(math.ceil((x1 - x0) / h)) + 2
    pts = []
    for j in range(rows + 1):
        y = y0 + j * dy
        off = 0.5 * h if j % 2 else 0.0
        xs = x0 + off + np.arange(cols) * h
        pts.append(np.column_stack([xs, np.full(cols, y)]))
    return np.concatenate(pts)


def _rect_boundary_points(corners, h):
    x0, y0, x1, y1 = corners
    nx = max(1, int(math.ceil((x1 - x0) / h)))
    ny = max(1, int(math.ceil((y1 - y0) / h)))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    bottom = np.column_stack([xs[:-1], np.full(nx, y0)])
    right = np.column_stack([np.full(ny, x1), ys[:-1]])
    top = np.column_stack([xs[1:][::-1], np.full(nx, y1)])
    left = np.column_stack([np.full(ny, x0), ys[1:][::-1]])
    return np.concatenate([bottom, right, top, left])


def _disk_boundary_points(center, radius, h):
    m = max(8, int(math.ceil(_TWO_PI * radius / h)))
    theta = np.arange(m) * (_TWO_PI / m)
    return np.column_stack([center[0] + radius * np.cos(theta),
                            center[1] + radius * np.sin(theta)])


class _CavityRings:
    """Graded point rings around one cavity, plus its clipping radius."""

    def __init__(self, center, shape, scale, m0, s0, h_far, max_extent):
        self.center = np.asarray(center, dtype=float)
        self.shape = shape
        self.scale = scale
        self.m0 = m0
        theta0 = np.arange(m0) * (_TWO_PI / m0)
        rho0 = np.asarray(shape.radius_at(theta0), dtype=float) * scale
        self.ring0 = self.center + np.column_stack([rho0 * np.cos(theta0),
                                                    rho0 * np.sin(theta0)])
        self.rho_max = shape.max_radius() * scale
        perim = shape.perimeter() * scale

        pts = []
        t, s, layer = 0.0, s0, 0
        while True:
            t_next = t + s
            if t_next > max_extent or s >= h_far:
                break
            layer += 1
            ring_perim = perim + _TWO_PI * t_next
            m = max(12, int(math.ceil(ring_perim / s)))
            stag = 0.5 * (layer % 2)
            th = (np.arange(m) + stag) * (_TWO_PI / m)
            rho = np.asarray(shape.radius_at(th), dtype=float) * scale + t_next
            pts.append(self.center + np.column_stack([rho * np.cos(th), rho * np.sin(th)]))
            t = t_next
            s = min(s * 1.35, h_far)
        self.outer_pts = np.concatenate(pts) if pts else np.zeros((0, 2))
        self.extent = t
        self.last_spacing = s
        self.clip_radius = self.rho_max + t + 0.55 * h_far

    def polygon_radius(self, phi):
        """Radius of the ring-0 polygon in direction phi (exact chord interpolation)."""
        dth = _TWO_PI / self.m0
        phi = np.asarray(phi, dtype=float) % _TWO_PI
        i = np.minimum((phi // dth).astype(int), self.m0 - 1)
        th_i = i * dth
        th_j = th_i + dth
        rho_i = np.asarray(self.shape.radius_at(th_i), dtype=float) * self.scale
        rho_j = np.asarray(self.shape.radius_at(th_j % _TWO_PI), dtype=float) * self.scale
        # polar equation of the chord through (rho_i, th_i), (rho_j, th_j)
        num = rho_i * rho_j * np.sin(dth)
        den = rho_i * np.sin(th_j - phi) + rho_j * np.sin(phi - th_i)
        return num / den

    def contains(self, pts):
        """Membership in the ring-0 polygon (the discrete hole)."""
        pts = np.atleast_2d(pts)
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        r = np.hypot(dx, dy)
        out = np.zeros(len(pts), dtype=bool)
        near = r < self.rho_max * (1 + 1e-12)
        if np.any(near):
            phi = np.arctan2(dy[near], dx[near])
            out[near] = r[near] < self.polygon_radius(phi) - 1e-14 * self.scale
        return out


def _assemble_cloud(boundary_pts, interior_pts, rings):
    """Stack points and record the ring-0 index range per cavity."""
    blocks = [boundary_pts, interior_pts]
    ring0_slices = []
    for r in rings:
        off = sum(len(b) for b in blocks)
        blocks.append(r.ring0)
        ring0_slices.append((off, off + len(r.ring0)))
        blocks.append(r.outer_pts)
    pts = np.concatenate([b for b in blocks if len(b)])
    return pts, ring0_slices


def _triangulate_and_tag(pts, rings, ring0_slices, n_outer_boundary):
    """Delaunay, drop cavity-interior triangles, orient, extract tagged boundary."""
    tri = Delaunay(pts)
    simplices = tri.simplices.copy()

    cent = pts[simplices].mean(axis=1)
    keep = np.ones(len(simplices), dtype=bool)
    for r in rings:
        d = np.hypot(cent[:, 0] - r.center[0], cent[:, 1] - r.center[1])
        cand = np.flatnonzero(keep & (d < r.rho_max * 1.0000001))
        if len(cand):
            inside = r.contains(cent[cand])
            keep[cand[inside]] = False
    simplices = simplices[keep]

    a = pts[simplices[:, 0]]
    b = pts[simplices[:, 1]]
    c = pts[simplices[:, 2]]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = det < 0
    simplices[flip, 1], simplices[flip, 2] = simplices[flip, 2], simplices[flip, 1].copy()
    if np.any(det == 0):
        raise MeshingError("degenerate (zero-area) triangle in triangulation")

    uniq, counts = _edge_counts(simplices)
    bedges = uniq[counts == 1]

    tags = np.zeros(len(bedges), dtype=np.int64)
    for k, (lo, hi) in enumerate(ring0_slices):
        on_ring = (bedges >= lo) & (bedges < hi)
        tags[on_ring.all(axis=1)] = k + 1
    return simplices, bedges, tags


def _conformity_ok(bedges, tags, ring0_slices):
    """Each cavity's tagged edges must be exactly the consecutive ring-0 pairs."""
    for k, (lo, hi) in enumerate(ring0_slices):
        m = hi - lo
        got = {tuple(e) for e in np.sort(bedges[tags == k + 1], axis=1)}
        want = {tuple(sorted((lo + i, lo + (i + 1) % m))) for i in range(m)}
        if got != want:
            return False
    return True


def _build(domain: DomainSpec, cavity_data, h: float, segments_per_cavity: int,
           structured_rect: bool):
    """Shared mesh pipeline.  cavity_data: list of (center, shape, scale)."""
    if h <= 0:
        raise MeshingError("h must be positive")

    centers = np.array([cd[0] for cd in cavity_data], dtype=float).reshape(-1, 2)
    n_cav = len(cavity_data)

    # clearances between cavity boundaries and to the outer boundary
    max_extents = []
    for i, (ci, shape_i, scale_i) in enumerate(cavity_data):
        rmax_i = shape_i.max_radius() * scale_i
        clear = domain.boundary_distance(np.asarray(ci)[None, :])[0] - rmax_i
        for j, (cj, shape_j, scale_j) in enumerate(cavity_data):
            if j == i:
                continue
            gap = (math.hypot(ci[0] - cj[0], ci[1] - cj[1])
                   - rmax_i - shape_j.max_radius() * scale_j)
            if gap <= 0:
                raise MeshingError(f"cavities {i} and {j} overlap or touch")
            clear = min(clear, 0.5 * gap)
        if clear <= 0:
            raise MeshingError(f"cavity {i} touches the outer boundary")
        max_extents.append(0.9 * clear)

    for refine in (1.0, 1.6):
        rings = []
        for (center, shape, scale), ext in zip(cavity_data, max_extents):
            h_cav = min(h, scale / 4.0) / refine
            perim = shape.perimeter() * scale
            m0 = max(segments_per_cavity, int(math.ceil(perim / h_cav)))
            s0 = perim / m0
            if ext < 1.5 * s0:
                pair = _closest_pair(centers) if n_cav > 1 else (0, 0)
                raise MeshingError(
                    f"cavity clearance {ext:.3g} below the local mesh scale "
                    f"{s0:.3g}; offending cavities {pair[0]} and {pair[1]}")
            rings.append(_CavityRings(center, shape, scale, m0, s0, h, ext))

        if domain.kind == "rectangle":
            if structured_rect and n_cav == 0:
                return _structured_rectangle(domain, h)
            boundary_pts = _rect_boundary_points(domain.corners, h)
            interior = _hex_lattice(domain.bounding_box(), h)
            ok = domain.contains(interior, margin=0.55 * h)
        else:
            boundary_pts = _disk_boundary_points(domain.center, domain.radius, h)
            interior = _hex_lattice(domain.bounding_box(), h)
            ok = domain.contains(interior, margin=0.55 * h)
        for r in rings:
            d = np.hypot(interior[:, 0] - r.center[0], interior[:, 1] - r.center[1])
            ok &= d > r.clip_radius
        interior = interior[ok]

        pts, ring0_slices = _assemble_cloud(boundary_pts, interior, rings)
        simplices, bedges, tags = _triangulate_and_tag(pts, rings, ring0_slices,
                                                       len(boundary_pts))
        if _conformity_ok(bedges, tags, ring0_slices):
            ell = np.concatenate([np.hypot(*(pts[simplices[:, i]] - pts[simplices[:, j]]).T)
                                  for i, j in ((0, 1), (1, 2), (2, 0))])
            return Mesh(pts, simplices, bedges, tags, float(ell.max()))

    raise MeshingError("cavity boundary not recovered by triangulation after refinement")


def _closest_pair(centers):
    d2 = np.sum((centers[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    k = np.unravel_index(np.argmin(d2), d2.shape)
    return int(k[0]), int(k[1])


def _structured_rectangle(domain: DomainSpec, h: float) -> Mesh:
    """Right-triangle grid; keeps the textbook interpolation constants."""
    x0, y0, x1, y1 = domain.corners
    nx = max(1, int(math.ceil((x1 - x0) / h)))
    ny = max(1, int(math.ceil((y1 - y0) / h)))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.asarray(tris, dtype=np.int64)

    bedges = []
    for i in range(nx):
        bedges.append((vid(i, 0), vid(i + 1, 0)))
        bedges.append((vid(i, ny), vid(i + 1, ny)))
    for j in range(ny):
        bedges.append((vid(0, j), vid(0, j + 1)))
        bedges.append((vid(nx, j), vid(nx, j + 1)))
    bedges = np.asarray(bedges, dtype=np.int64)
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    return Mesh(pts, tris, bedges, np.zeros(len(bedges), dtype=np.int64),
                math.hypot(hx, hy))


# ---------------------------------------------------------------------------
# public mesh builders
# ---------------------------------------------------------------------------

def mesh_unperforated(domain: DomainSpec, h: float) -> Mesh:
    """Triangulate the base domain without cavities."""
    return _build(domain, [], h, 32, structured_rect=True)


def mesh_perforated(p: Perforation, h: float, segments_per_cavity: int = 32) -> Mesh:
    """Triangulate the perforated domain; cavity boundaries are resolved and tagged.

    Near each cavity the edge-length target is min(h, eps*eta/4), independent
    of the far-field h, and the boundary polygon gets at least
    ``segments_per_cavity`` segments (more when needed so polygon edges stay
    below the local target).
    """
    if segments_per_cavity < 8:
        raise MeshingError("segments_per_cavity must be at least 8")
    cavity_data = [(c.center, c.shape, p.scale) for c in p.cavities]
    return _build(p.domain, cavity_data, h, segments_per_cavity, structured_rect=True)


def mesh_local_annulus(domain: DomainSpec, center, shape, scale: float, h: float,
                       segments_per_cavity: int = 32) -> Mesh:
    """Mesh a small neighborhood domain with one cavity, bypassing guard checks.

    Used for the trace-constant eigenproblems whose geometries are local
    neighborhoods of a single cavity, not admissible perforations.
    """
    return _build(domain, [(tuple(center), shape, scale)], h, segments_per_cavity,
                  structured_rect=False)


# ---------------------------------------------------------------------------
# nodal transfer between meshes
# ---------------------------------------------------------------------------

def transfer(u: DiscreteFunction, target: Mesh, bary_tol: float = 0.08) -> DiscreteFunction:
    """Evaluate the piecewise-linear extension of ``u`` at the target's vertices.

    Values are exact at shared vertices and for globally linear functions.
    Target vertices that fall outside every source triangle by more than
    ``bary_tol`` (in barycentric units) raise :class:`TransferError`.
    """
    src = u.mesh
    pts = target.vertices
    a, b, c = src.corners()
    det = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
           - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    tree = cKDTree(src.centroids())
    n = len(pts)
    chosen = np.full(n, -1, dtype=np.int64)
    best_lam = np.zeros((n, 3))
    need = np.arange(n)

    for k in (8, 32, 256):
        if len(need) == 0:
            break
        kk = min(k, src.n_triangles)
        _, idx = tree.query(pts[need], k=kk)
        idx = np.atleast_2d(idx.reshape(len(need), kk))
        q = pts[need][:, None, :]               # (n,1,2)
        aa, bb, cc = a[idx], b[idx], c[idx]     # (n,k,2)
        dd = det[idx]
        l1 = ((bb[..., 0] - q[..., 0]) * (cc[..., 1] - q[..., 1])
              - (bb[..., 1] - q[..., 1]) * (cc[..., 0] - q[..., 0])) / dd
        l2 = ((cc[..., 0] - q[..., 0]) * (aa[..., 1] - q[..., 1])
              - (cc[..., 1] - q[..., 1]) * (aa[..., 0] - q[..., 0])) / dd
        l3 = 1.0 - l1 - l2
        lam_min = np.minimum(np.minimum(l1, l2), l3)
        pick = np.argmax(lam_min, axis=1)
        rows = np.arange(len(need))
        ok = lam_min[rows, pick] >= -bary_tol
        sel = need[ok]
        tri_sel = idx[rows[ok], pick[ok]]
        chosen[sel] = tri_sel
        best_lam[sel, 0] = l1[rows[ok], pick[ok]]
        best_lam[sel, 1] = l2[rows[ok], pick[ok]]
        best_lam[sel, 2] = l3[rows[ok], pick[ok]]
        need = need[~ok]

    if len(need):
        listed = ", ".join(f"{i}:({pts[i, 0]:.6g},{pts[i, 1]:.6g})" for i in need[:5])
        raise TransferError(
            f"{len(need)} target vertices outside the source mesh, e.g. {listed}")

    tri_v = src.triangles[chosen]
    vals = (best_lam[:, 0] * u.values[tri_v[:, 0]]
            + best_lam[:, 1] * u.values[tri_v[:, 1]]
            + best_lam[:, 2] * u.values[tri_v[:, 2]])
    return DiscreteFunction(target, vals)


# ---------------------------------------------------------------------------
# plain-text export
# ---------------------------------------------------------------------------

def write_mesh(mesh: Mesh, path) -> None:
    """Sections VERTICES / TRIANGLES / BOUNDARY, whitespace-delimited, 0-based."""
    with open(path, "w") as fh:
        fh.write("VERTICES\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write("TRIANGLES\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        fh.write("BOUNDARY\n")
        for (i, j), t in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{i} {j} {t}\n")


def read_mesh(path) -> Mesh:
    verts, tris, bed, tags = [], [], [], []
    section = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line in ("VERTICES", "TRIANGLES", "BOUNDARY"):
                section = line
                continue
            parts = line.split()
            if section == "VERTICES":
                verts.append((float(parts[0]), float(parts[1])))
            elif section == "TRIANGLES":
                tris.append(tuple(int(s) for s in parts[:3]))
            elif section == "BOUNDARY":
                bed.append((int(parts[0]), int(parts[1])))
                tags.append(int(parts[2]))
    verts = np.asarray(verts, dtype=float)
    tris = np.asarray(tris, dtype=np.int64)
    ell = np.concatenate([np.hypot(*(verts[tris[:, i]] - verts[tris[:, j]]).T)
                          for i, j in ((0, 1), (1, 2), (2, 0))]) if len(tris) else [0.0]
    return Mesh(verts, tris, np.asarray(bed, dtype=np.int64),
                np.asarray(tags, dtype=np.int64), float(np.max(ell)))
