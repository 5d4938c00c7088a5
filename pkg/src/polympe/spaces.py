"""Modal DG spaces on polygonal elements, with quadrature and projection.

Each element carries an L2-orthonormal polynomial basis of total degree m,
obtained from bounding-box-scaled Legendre seed polynomials recombined by a
Cholesky factorization of the quadrature Gram matrix. Volume quadrature on a
polygon composes collapsed Gauss rules over the centroid-fan triangles and is
exact to the requested order; face rules are Gauss-Legendre segments.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import cholesky, solve_triangular

from .mesh import ELASTIC, FLUID, Face, PolyMesh


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, 2) for volumes, (n, 2) along the segment for faces
    weights: np.ndarray


@lru_cache(maxsize=None)
def _gauss01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _triangle_rule(order: int):
    """Reference rule on the unit triangle (0,0)-(1,0)-(0,1), exact to ``order``.

    Collapsed tensor rule: x = s, y = s t maps the unit square onto the
    triangle with Jacobian s, so degree-p integrands need ceil((p+2)/2) x
    ceil((p+1)/2) Gauss points.
    """
    ns = (order + 3) // 2
    nt = (order + 2) // 2
    s, ws = _gauss01(ns)
    t, wt = _gauss01(nt)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * S
    x = S * (1.0 - T)
    y = S * T
    return x.ravel(), y.ravel(), W.ravel()


def volume_quadrature(element_vertices, order: int) -> QuadratureRule:
    """Quadrature over a star-shaped polygon via its centroid fan."""
    if order < 1:
        raise ValueError("order must be >= 1")
    pts = np.asarray(element_vertices, dtype=float)
    c = pts.mean(axis=0)
    xr, yr, wr = _triangle_rule(order)
    all_pts, all_w = [], []
    for i in range(len(pts)):
        v0, v1 = pts[i], pts[(i + 1) % len(pts)]
        e0, e1 = v0 - c, v1 - c
        area2 = e0[0] * e1[1] - e0[1] * e1[0]
        p = c + np.outer(xr, e0) + np.outer(yr, e1)
        all_pts.append(p)
        all_w.append(wr * area2)
    return QuadratureRule(np.vstack(all_pts), np.concatenate(all_w))


def face_quadrature(face, order: int) -> QuadratureRule:
    """Gauss rule on a straight face, exact to ``order``; accepts a
    :class:`Face` plus the owning mesh, or a (2, 2) endpoint array."""
    if isinstance(face, tuple):
        mesh, f = face
        p0, p1 = mesh.vertices[f.v0], mesh.vertices[f.v1]
    else:
        seg = np.asarray(face, dtype=float)
        p0, p1 = seg[0], seg[1]
    n = max(1, (order + 2) // 2)
    s, w = _gauss01(n)
    pts = p0[None, :] + np.outer(s, p1 - p0)
    length = float(np.hypot(*(p1 - p0)))
    return QuadratureRule(pts, w * length)


def _graded_exponents(m: int):
    return [(d - b, b) for d in range(m + 1) for b in range(d + 1)]


@lru_cache(maxsize=None)
def _leg_coeffs(n: int):
    c = np.zeros(n + 1)
    c[n] = 1.0
    return c, npleg.legder(c)


def _legendre_table(xi: np.ndarray, m: int):
    """Values and derivatives of P_0..P_m at mapped coordinates."""
    vals = np.empty((len(xi), m + 1))
    ders = np.empty((len(xi), m + 1))
    for n in range(m + 1):
        c, dc = _leg_coeffs(n)
        vals[:, n] = npleg.legval(xi, c)
        ders[:, n] = npleg.legval(xi, dc) if n > 0 else 0.0
    return vals, ders


class _ElementBasis:
    """Per-element orthonormalized modal basis on the bounding box."""

    __slots__ = ("center", "half", "coeff", "exps", "m")

    def __init__(self, bbox, m, quad: QuadratureRule):
        lo, hi = bbox
        self.half = 0.5 * (hi - lo)
        if self.half.min() <= 0.0:
            raise ValueError("degenerate bounding box")
        self.center = 0.5 * (hi + lo)
        self.m = m
        self.exps = _graded_exponents(m)
        seed = self._seed_values(quad.points)
        gram = seed.T @ (quad.weights[:, None] * seed)
        L = cholesky(gram, lower=True)
        n = len(self.exps)
        self.coeff = solve_triangular(L, np.eye(n), lower=True)

    def _map(self, pts):
        return (pts - self.center) / self.half

    def _seed_values(self, pts):
        xi = self._map(pts)
        lx, _ = _legendre_table(xi[:, 0], self.m)
        ly, _ = _legendre_table(xi[:, 1], self.m)
        return np.stack([lx[:, a] * ly[:, b] for a, b in self.exps], axis=1)

    def eval(self, pts):
        """Basis values and gradients at physical points -> (phi, dphix, dphiy)."""
        xi = self._map(pts)
        lx, dlx = _legendre_table(xi[:, 0], self.m)
        ly, dly = _legendre_table(xi[:, 1], self.m)
        v = np.stack([lx[:, a] * ly[:, b] for a, b in self.exps], axis=1)
        gx = np.stack([dlx[:, a] * ly[:, b] for a, b in self.exps], axis=1) / self.half[0]
        gy = np.stack([lx[:, a] * dly[:, b] for a, b in self.exps], axis=1) / self.half[1]
        return v @ self.coeff.T, gx @ self.coeff.T, gy @ self.coeff.T


class DGSpace:
    """Discontinuous piecewise-polynomial spaces for all model fields.

    Field blocks, in global DOF order: displacement ``d`` (2 components,
    elastic elements), one scalar pressure per compartment (elastic), fluid
    velocity ``u`` (2 components), fluid pressure ``p``. Within a field the
    layout is element-major, then component-major, then modal index.
    """

    def __init__(self, mesh: PolyMesh, m: int, compartments=("E",)):
        if m < 1:
            raise ValueError("polynomial degree m must be >= 1")
        self.mesh = mesh
        self.m = int(m)
        self.compartments = tuple(compartments)
        self.n_loc = (m + 1) * (m + 2) // 2
        self.vol_order = 2 * m + 2
        self.face_order = 2 * m + 3

        self.el_ids = mesh.element_ids(ELASTIC)
        self.f_ids = mesh.element_ids(FLUID)
        self.local_index = {}
        for loc, k in enumerate(self.el_ids):
            self.local_index[int(k)] = loc
        for loc, k in enumerate(self.f_ids):
            self.local_index[int(k)] = loc

        self.fields = ["d"] + [f"p:{j}" for j in self.compartments] + ["u", "p"]
        self._components = {f: (2 if f in ("d", "u") else 1) for f in self.fields}
        self.offsets, self.sizes = {}, {}
        pos = 0
        for f in self.fields:
            n_elem = len(self.el_ids) if self.field_domain(f) == ELASTIC else len(self.f_ids)
            self.offsets[f] = pos
            self.sizes[f] = self._components[f] * n_elem * self.n_loc
            pos += self.sizes[f]
        self.n_dofs = pos

        self._vol = {}
        self._basis = {}
        for k in range(mesh.n_elements):
            rule = volume_quadrature(mesh.vertices[mesh.elements[k]], self.vol_order)
            self._vol[k] = rule
            self._basis[k] = _ElementBasis(mesh.bboxes[k], m, rule)
        self._vol_eval = {}
        self._face_rule = {}
        self._face_eval = {}

    # -- layout ----------------------------------------------------------

    def field_domain(self, field: str) -> str:
        return FLUID if field in ("u", "p") else ELASTIC

    def components(self, field: str) -> int:
        return self._components[field]

    def field_elements(self, field: str) -> np.ndarray:
        return self.f_ids if self.field_domain(field) == FLUID else self.el_ids

    def elem_dofs(self, field: str, elem: int, comp: int = 0) -> np.ndarray:
        """Field-local DOF indices of one component block of one element."""
        loc = self.local_index[int(elem)]
        stride = self._components[field] * self.n_loc
        start = loc * stride + comp * self.n_loc
        return np.arange(start, start + self.n_loc)

    # -- cached evaluations ------------------------------------------------

    def vol(self, elem: int):
        """(points, weights, phi, dphix, dphiy) on element ``elem``."""
        if elem not in self._vol_eval:
            rule = self._vol[elem]
            self._vol_eval[elem] = (rule.points, rule.weights) + self._basis[elem].eval(rule.points)
        return self._vol_eval[elem]

    def face_rule(self, fidx: int, face: Face, mesh: PolyMesh) -> QuadratureRule:
        if fidx not in self._face_rule:
            self._face_rule[fidx] = face_quadrature((mesh, face), self.face_order)
        return self._face_rule[fidx]

    def face_trace(self, fidx: int, face: Face, elem: int):
        """(phi, dphix, dphiy) of element ``elem`` at the face quadrature points."""
        key = (fidx, elem)
        if key not in self._face_eval:
            rule = self.face_rule(fidx, face, self.mesh)
            self._face_eval[key] = self._basis[elem].eval(rule.points)
        return self._face_eval[key]

    def basis_eval(self, elem: int, pts: np.ndarray):
        return self._basis[elem].eval(np.asarray(pts, dtype=float))


def build_space(mesh: PolyMesh, m: int, compartments=("E",)) -> DGSpace:
    """Build the degree-``m`` DG space over a two-domain mesh."""
    return DGSpace(mesh, m, compartments)


def l2_project(space: DGSpace, field: str, fn, t: float | None = None) -> np.ndarray:
    """Element-wise L2 projection of a pointwise function onto one field block.

    ``fn`` maps an (n, 2) array of points to values of shape (n,) for scalar
    fields or (n, 2) for vector fields; a trailing ``t`` argument is passed
    when given. Returns the field-local DOF vector.
    """
    out = np.zeros(space.sizes[field])
    ncomp = space.components(field)
    for elem in space.field_elements(field):
        pts, w, phi, _, _ = space.vol(int(elem))
        vals = fn(pts) if t is None else fn(pts, t)
        vals = np.asarray(vals, dtype=float)
        if ncomp == 1:
            out[space.elem_dofs(field, int(elem))] = phi.T @ (w * vals.reshape(-1))
        else:
            for c in range(ncomp):
                out[space.elem_dofs(field, int(elem), c)] = phi.T @ (w * vals[:, c])
    return out


def eval_field(space: DGSpace, field: str, vec: np.ndarray, elem: int, pts: np.ndarray):
    """Evaluate a field-local DOF vector on one element at given points."""
    phi, _, _ = space.basis_eval(int(elem), pts)
    if space.components(field) == 1:
        return phi @ vec[space.elem_dofs(field, int(elem))]
    return np.stack(
        [phi @ vec[space.elem_dofs(field, int(elem), c)] for c in range(2)], axis=1
    )
