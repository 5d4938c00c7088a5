"""Output writers: rate tables (CSV), field snapshots (CSV and legacy ASCII
VTK POLYDATA with per-cell data), and JSON run manifests."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

RATE_COLUMNS = ["m", "h", "n_elements_el", "n_elements_f",
                "err_energy", "err_d", "err_pE", "err_u", "err_p", "rate_energy"]


def write_rate_table(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RATE_COLUMNS)
        w.writeheader()
        for row in rows:
            out = dict(row)
            for k, v in out.items():
                if isinstance(v, float):
                    out[k] = f"{v:.16e}" if k != "rate_energy" else f"{v:.6f}"
            w.writerow(out)


def cell_means(space, state: dict) -> dict:
    """Per-element mean values of every field (vectors component-wise);
    fields of the other subdomain are zero on an element."""
    mesh = space.mesh
    n = mesh.n_elements
    out = {}
    for field in space.fields:
        ncomp = space.components(field)
        vals = np.zeros((n, ncomp))
        for elem in space.field_elements(field):
            elem = int(elem)
            pts, w, phi, _, _ = space.vol(elem)
            area = w.sum()
            for c in range(ncomp):
                dofs = space.elem_dofs(field, elem, c)
                vals[elem, c] = float(w @ (phi @ state[field][dofs])) / area
        out[field] = vals
    return out


def write_snapshot_csv(space, state: dict, path) -> None:
    mesh = space.mesh
    means = cell_means(space, state)
    cols = ["element", "domain", "cx", "cy"]
    for field in space.fields:
        base = field.replace(":", "_")
        cols += [f"{base}_x", f"{base}_y"] if space.components(field) == 2 else [base]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for k in range(mesh.n_elements):
            row = [k, mesh.element_domain[k],
                   f"{mesh.centroids[k][0]:.16e}", f"{mesh.centroids[k][1]:.16e}"]
            for field in space.fields:
                row += [f"{v:.16e}" for v in means[field][k]]
            w.writerow(row)


def write_snapshot_vtk(space, state: dict, path, title="polympe snapshot") -> None:
    mesh = space.mesh
    means = cell_means(space, state)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA",
             f"POINTS {len(mesh.vertices)} double"]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.16e} {v[1]:.16e} 0.0")
    total = sum(len(e) + 1 for e in mesh.elements)
    lines.append(f"POLYGONS {mesh.n_elements} {total}")
    for e in mesh.elements:
        lines.append(" ".join([str(len(e))] + [str(int(i)) for i in e]))
    lines.append(f"CELL_DATA {mesh.n_elements}")
    for field in space.fields:
        base = field.replace(":", "_")
        vals = means[field]
        if space.components(field) == 2:
            lines.append(f"VECTORS {base} double")
            for v in vals:
                lines.append(f"{v[0]:.16e} {v[1]:.16e} 0.0")
        else:
            lines.append(f"SCALARS {base} double 1")
            lines.append("LOOKUP_TABLE default")
            for v in vals:
                lines.append(f"{v[0]:.16e}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(path, config: dict, extra: dict) -> None:
    doc = {"config": config, **extra}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
