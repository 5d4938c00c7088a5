"""Built-in mesh families on the two-domain verification geometry.

The geometry is the rectangle (-1, 1) x (0, 1) split at x = 0: elastic on
the left, fluid on the right, interface at x = 0. Boundary labels:

* ``"el"``   -- outer boundary of the elastic subdomain
* ``"wall"`` -- top/bottom of the fluid subdomain
* ``"out"``  -- right edge x = 1 (outlet)
"""

from __future__ import annotations

import numpy as np

from .mesh import ELASTIC, FLUID, PolyMesh

#: Dirichlet maps used by the verification cases (manufactured traces on all
#: walls, natural outlet) and by the synthetic demo (clamped tissue, no-slip
#: fluid walls, zero-flux pressure).
VERIFICATION_DIRICHLET = {"el": {"d", "p:E"}, "wall": {"u"}, "out": set()}
DEMO_DIRICHLET = {"el": {"d"}, "wall": {"u"}, "out": set()}


def _label(x0, y0, x1, y1):
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    on_left = np.isclose(xm, -1.0)
    on_right = np.isclose(xm, 1.0)
    on_horiz = np.isclose(ym, 0.0) or np.isclose(ym, 1.0)
    if on_right:
        return "out"
    if on_left:
        return "el"
    if on_horiz:
        return "el" if xm < 0.0 else "wall"
    return None


def cartesian_two_domain(ny: int, nx: int | None = None) -> PolyMesh:
    """Uniform quadrilateral grid split at x = 0; ``nx`` defaults to ``2 ny``."""
    if ny < 1:
        raise ValueError("ny must be >= 1")
    nx = 2 * ny if nx is None else nx
    if nx % 2:
        raise ValueError("nx must be even so the grid is aligned with x = 0")
    xs = np.linspace(-1.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    vid = lambda i, j: j * (nx + 1) + i
    vertices = [(x, y) for y in ys for x in xs]
    elements, domains = [], []
    for j in range(ny):
        for i in range(nx):
            elements.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
            domains.append(ELASTIC if 0.5 * (xs[i] + xs[i + 1]) < 0.0 else FLUID)
    labels = _boundary_labels(np.asarray(vertices), elements)
    return PolyMesh(vertices, elements, domains, labels)


def triangulated_two_domain(ny: int, nx_el: int | None = None, nx_f: int | None = None,
                            jitter: float = 0.0, seed: int = 0) -> PolyMesh:
    """Structured right-triangle mesh, built per subdomain with a shared
    vertex layout on the interface (``ny`` rows on both sides).

    ``jitter`` displaces strictly interior vertices by up to that fraction
    of the local grid spacing (deterministic for a fixed seed); boundary and
    interface vertices stay exact, so the geometry and the interface line
    are preserved.
    """
    nx_el = ny if nx_el is None else nx_el
    nx_f = ny if nx_f is None else nx_f

    vertices: list[tuple[float, float]] = []
    index: dict[tuple[float, float], int] = {}

    def vid(x, y):
        key = (round(float(x), 12), round(float(y), 12))
        if key not in index:
            index[key] = len(vertices)
            vertices.append(key)
        return index[key]

    elements, domains = [], []

    def add_grid(x_lo, x_hi, nx, domain):
        xs = np.linspace(x_lo, x_hi, nx + 1)
        ys = np.linspace(0.0, 1.0, ny + 1)
        for j in range(ny):
            for i in range(nx):
                v00 = vid(xs[i], ys[j])
                v10 = vid(xs[i + 1], ys[j])
                v11 = vid(xs[i + 1], ys[j + 1])
                v01 = vid(xs[i], ys[j + 1])
                elements.append([v00, v10, v11])
                elements.append([v00, v11, v01])
                domains.extend([domain, domain])

    add_grid(-1.0, 0.0, nx_el, ELASTIC)
    add_grid(0.0, 1.0, nx_f, FLUID)
    verts = np.asarray(vertices, dtype=float)
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        shifts = rng.uniform(-jitter, jitter, verts.shape)
        hx = np.where(verts[:, 0] < 0.0, 1.0 / nx_el, 1.0 / nx_f)
        interior = (~np.isclose(verts[:, 0], -1.0) & ~np.isclose(verts[:, 0], 0.0)
                    & ~np.isclose(verts[:, 0], 1.0) & ~np.isclose(verts[:, 1], 0.0)
                    & ~np.isclose(verts[:, 1], 1.0))
        verts[interior, 0] += shifts[interior, 0] * hx[interior]
        verts[interior, 1] += shifts[interior, 1] / ny
    labels = _boundary_labels(verts, elements)
    return PolyMesh(verts, elements, domains, labels)


def _boundary_labels(vertices, elements):
    counts: dict[tuple[int, int], int] = {}
    for elem in elements:
        for i in range(len(elem)):
            a, b = elem[i], elem[(i + 1) % len(elem)]
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    labels = {}
    for (a, b), c in counts.items():
        if c == 1:
            lab = _label(*vertices[a], *vertices[b])
            if lab is None:
                raise ValueError(f"boundary edge {(a, b)} off the reference geometry")
            labels[(a, b)] = lab
    return labels
