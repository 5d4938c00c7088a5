"""Global block operator: assembly into the coupled layout, structural
checks, and the steady-state reduction.

Block placement (rows d, one per compartment, u, p):

* row d:   (dtt M_el + A_el) D + sum_k B_k^T P_k + J_el^T P_E
* row j:   -(B_j + [j=E] J_el) dt D + (dt M_j + A_j + C_jj) P_j
           + sum_{k!=j} C_jk P_k - [j=E] J_f U
* row u:   J_f^T P_E + (dt M_f + A_f) U + B_f^T P
* row p:   -B_f U + S P

The interface blocks enter antisymmetrically (+J_el^T against -J_el dt,
+J_f^T against -J_f) so their contributions cancel in the energy identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import forms
from .mesh import FaceSet
from .params import PhysicalParams
from .spaces import DGSpace

EXCHANGE = "E"


@dataclass
class SystemMatrices:
    space: DGSpace
    params: PhysicalParams
    M_el: sp.csr_matrix
    A_el: sp.csr_matrix
    M_j: dict
    A_j: dict
    B_j: dict
    C: dict  # C[j][k]
    M_f: sp.csr_matrix
    A_f: sp.csr_matrix
    B_f: sp.csr_matrix
    S: sp.csr_matrix
    J_el: sp.csr_matrix | None
    J_f: sp.csr_matrix | None

    @property
    def compartments(self):
        return self.params.compartments

    @property
    def n_unknowns(self) -> int:
        return self.space.n_dofs

    def field_slice(self, name: str) -> slice:
        off = self.space.offsets[name]
        return slice(off, off + self.space.sizes[name])


def build_system(space: DGSpace, params: PhysicalParams, faces: FaceSet,
                 elastic=None, pressures=None, fluid=None, interface=None) -> SystemMatrices:
    """Assemble (or accept pre-assembled) blocks and wire them into the
    coupled layout. Raises on block dimension mismatches."""
    if tuple(params.compartments) != tuple(space.compartments):
        raise ValueError("params and space disagree on the compartment set")
    elastic = elastic or forms.assemble_elastic(space, params, faces)
    pressures = pressures or {
        j: forms.assemble_pressure(space, params, faces, j) for j in params.compartments
    }
    fluid = fluid or forms.assemble_fluid(space, params, faces)
    has_exchange = EXCHANGE in params.compartments
    if interface is None and has_exchange:
        interface = forms.assemble_interface(space, params, faces, EXCHANGE)

    sizes = space.sizes
    def _check(mat, nr, nc, name):
        if mat.shape != (nr, nc):
            raise ValueError(f"block {name} has shape {mat.shape}, expected {(nr, nc)}")

    _check(elastic["A"], sizes["d"], sizes["d"], "A_el")
    for j in params.compartments:
        _check(pressures[j]["B"], sizes[f"p:{j}"], sizes["d"], f"B_{j}")
    _check(fluid["B"], sizes["p"], sizes["u"], "B_f")
    if has_exchange:
        _check(interface["J_el"], sizes[f"p:{EXCHANGE}"], sizes["d"], "J_el")
        _check(interface["J_f"], sizes[f"p:{EXCHANGE}"], sizes["u"], "J_f")

    return SystemMatrices(
        space=space, params=params,
        M_el=elastic["M"], A_el=elastic["A"],
        M_j={j: pressures[j]["M"] for j in params.compartments},
        A_j={j: pressures[j]["A"] for j in params.compartments},
        B_j={j: pressures[j]["B"] for j in params.compartments},
        C={j: pressures[j]["C"] for j in params.compartments},
        M_f=fluid["M"], A_f=fluid["A"], B_f=fluid["B"], S=fluid["S"],
        J_el=interface["J_el"] if has_exchange else None,
        J_f=interface["J_f"] if has_exchange else None,
    )


def build_global(sys: SystemMatrices, s: float = 0.0) -> sp.csr_matrix:
    """The stacked operator with the time-derivative slots replaced by the
    scalar ``s`` (``s = 0`` gives the steady operator)."""
    J = list(sys.compartments)
    fields = sys.space.fields
    idx = {f: i for i, f in enumerate(fields)}
    n = len(fields)
    blocks = [[None] * n for _ in range(n)]

    blocks[idx["d"]][idx["d"]] = s * s * sys.M_el + sys.A_el
    for j in J:
        blocks[idx["d"]][idx[f"p:{j}"]] = sys.B_j[j].T.tocsr()
    if sys.J_el is not None:
        pe = idx[f"p:{EXCHANGE}"]
        blocks[idx["d"]][pe] = blocks[idx["d"]][pe] + sys.J_el.T

    for j in J:
        r = idx[f"p:{j}"]
        coupl = sys.B_j[j]
        if j == EXCHANGE and sys.J_el is not None:
            coupl = coupl + sys.J_el
        blocks[r][idx["d"]] = -s * coupl
        for k in J:
            blk = sys.C[j][k]
            if k == j:
                blk = blk + s * sys.M_j[j] + sys.A_j[j]
            blocks[r][idx[f"p:{k}"]] = blk
        if j == EXCHANGE and sys.J_f is not None:
            blocks[r][idx["u"]] = -sys.J_f

    if sys.J_f is not None:
        blocks[idx["u"]][idx[f"p:{EXCHANGE}"]] = sys.J_f.T.tocsr()
    blocks[idx["u"]][idx["u"]] = s * sys.M_f + sys.A_f
    blocks[idx["u"]][idx["p"]] = sys.B_f.T.tocsr()
    blocks[idx["p"]][idx["u"]] = -sys.B_f
    blocks[idx["p"]][idx["p"]] = sys.S

    return sp.bmat(blocks, format="csr")


def stack_loads(sys: SystemMatrices, loads) -> np.ndarray:
    parts = [loads["el"]]
    parts += [loads["j"][j] for j in sys.compartments]
    parts += [loads["f"], loads["p"]]
    return np.concatenate(parts)


@dataclass
class SteadySystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    sys: SystemMatrices

    def split(self, x: np.ndarray) -> dict:
        return {f: x[self.sys.field_slice(f)] for f in self.sys.space.fields}


def build_steady(sys: SystemMatrices, loads) -> SteadySystem:
    """Drop every time-derivative slot and stack the loads; for manufactured
    data the divergence row carries the wall-datum lifting, otherwise zero."""
    return SteadySystem(matrix=build_global(sys, s=0.0), rhs=stack_loads(sys, loads), sys=sys)


@dataclass
class StructuralReport:
    symmetry: dict = field(default_factory=dict)
    psd_min: dict = field(default_factory=dict)
    pairing: dict = field(default_factory=dict)
    interface_energy: float = 0.0
    sym_tol: float = 1e-12
    psd_tol: float = -1e-10

    @property
    def passed(self) -> bool:
        return (
            all(v < self.sym_tol for v in self.symmetry.values())
            and all(v >= self.psd_tol for v in self.psd_min.values())
            and all(v < self.sym_tol for v in self.pairing.values())
            and self.interface_energy < self.sym_tol
        )

    def summary(self) -> str:
        lines = ["structural checks: " + ("PASS" if self.passed else "FAIL")]
        for name, v in self.symmetry.items():
            lines.append(f"  symmetry {name}: {v:.3e}")
        for name, v in self.psd_min.items():
            lines.append(f"  psd min(x'Ax/|x|^2) {name}: {v:.3e}")
        for name, v in self.pairing.items():
            lines.append(f"  pairing {name}: {v:.3e}")
        lines.append(f"  interface energy cancellation: {self.interface_energy:.3e}")
        return "\n".join(lines)


def _rel_sym(mat) -> float:
    if mat.shape[0] == 0:
        return 0.0
    scale = np.abs(mat).max() or 1.0
    diff = (mat - mat.T).tocoo()
    return (np.abs(diff.data).max() / scale) if diff.nnz else 0.0


def _rel_diff(a, b) -> float:
    scale = max(np.abs(a).max() if a.nnz else 0.0, np.abs(b).max() if b.nnz else 0.0, 1e-300)
    d = (a - b).tocoo()
    return (np.abs(d.data).max() / scale) if d.nnz else 0.0


def structural_checks(sys: SystemMatrices, n_samples: int = 200, seed: int = 0,
                      global_matrix=None) -> StructuralReport:
    """Symmetry, positive-semidefiniteness sampling, transpose pairing of the
    placed blocks, and the interface energy-cancellation residual.

    ``global_matrix`` may supply an externally assembled stacked operator
    (with unit time-derivative slots) to be checked against the stored
    blocks; by default it is built from them.
    """
    rep = StructuralReport()
    rng = np.random.default_rng(seed)

    named = {"A_el": sys.A_el, "A_f": sys.A_f, "S": sys.S,
             "M_el": sys.M_el, "M_f": sys.M_f}
    for j in sys.compartments:
        named[f"A_{j}"] = sys.A_j[j]
        named[f"M_{j}"] = sys.M_j[j]
    for name, mat in named.items():
        rep.symmetry[name] = _rel_sym(mat)
        if name.startswith("A_") or name == "S":
            worst = np.inf
            for _ in range(n_samples):
                v = rng.standard_normal(mat.shape[0])
                worst = min(worst, float(v @ (mat @ v)) / float(v @ v))
            rep.psd_min[name] = worst

    G1 = build_global(sys, s=1.0) if global_matrix is None else global_matrix
    G0 = build_global(sys, s=0.0)
    Gt = (G1 - G0).tocsr()
    sl = sys.field_slice

    def blk(G, rname, cname):
        return G[sl(rname), :][:, sl(cname)].tocsr()

    for j in sys.compartments:
        placed = blk(G0, "d", f"p:{j}")
        ref = sys.B_j[j].T.tocsr()
        if j == EXCHANGE and sys.J_el is not None:
            ref = ref + sys.J_el.T
        rep.pairing[f"B_{j}^T"] = _rel_diff(placed, ref)

    if sys.J_f is not None:
        pe = f"p:{EXCHANGE}"
        rep.pairing["J_f^T"] = _rel_diff(blk(G1, "u", pe), sys.J_f.T.tocsr())
        rep.pairing["J_f"] = _rel_diff(blk(G1, pe, "u"), (-sys.J_f).tocsr())

        # energy rate of the interface coupling on random compatible states:
        # the two placements must cancel exactly
        v = rng.standard_normal(sys.space.sizes["d"])
        pE = rng.standard_normal(sys.space.sizes[pe])
        u = rng.standard_normal(sys.space.sizes["u"])
        jelT_placed = blk(G0, "d", pe) - sys.B_j[EXCHANGE].T.tocsr()
        mjel_placed = blk(Gt, pe, "d") + sys.B_j[EXCHANGE]
        r1 = float(v @ (jelT_placed @ pE)) + float(pE @ (mjel_placed @ v))
        r2 = float(u @ (blk(G1, "u", pe) @ pE)) + float(pE @ (blk(G1, pe, "u") @ u))
        scale = max(abs(float(v @ (jelT_placed @ pE))), abs(float(u @ (blk(G1, "u", pe) @ pE))), 1e-300)
        rep.interface_energy = max(abs(r1), abs(r2)) / scale

    return rep


def export_matrix_market(sys: SystemMatrices, path, s: float = 0.0) -> None:
    """Write the stacked operator in Matrix Market coordinate format."""
    from scipy.io import mmwrite

    mmwrite(str(path), build_global(sys, s=s))
