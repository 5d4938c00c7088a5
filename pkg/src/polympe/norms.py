"""Broken DG norms, time-accumulated energy norms, and convergence rates.

Each broken norm pairs an element-wise seminorm with penalty-weighted jump
terms over the face set of its variable: the displacement and compartment
pressures over interior-elastic plus their Dirichlet faces, the fluid
velocity over interior-fluid faces only, and the fluid pressure over
interior-fluid plus velocity-Dirichlet faces (the stabilization form S is
assembled over interior faces only; the norm deliberately measures the wider
set). Errors against an exact solution are evaluated at quadrature points
from closed-form exact values and derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forms import penalty_coefficients
from .mesh import FaceSet
from .params import PhysicalParams
from .spaces import DGSpace


def _vals_on(space, field, vec, elem, phi):
    if space.components(field) == 1:
        return phi @ vec[space.elem_dofs(field, elem)]
    return np.stack([phi @ vec[space.elem_dofs(field, elem, c)] for c in range(2)], axis=1)


def _grads_on(space, field, vec, elem, gx, gy):
    if space.components(field) == 1:
        d = vec[space.elem_dofs(field, elem)]
        return np.stack([gx @ d, gy @ d], axis=1)
    return np.stack(
        [np.stack([gx @ vec[space.elem_dofs(field, elem, c)],
                   gy @ vec[space.elem_dofs(field, elem, c)]], axis=1) for c in range(2)],
        axis=1,
    )


class FieldError:
    """Evaluates (exact - discrete) values/gradients, or the plain discrete
    field when no exact closure is given."""

    def __init__(self, space, field, vec, exact=None, exact_name=None, t=0.0):
        self.space, self.field, self.vec = space, field, vec
        self.exact, self.t = exact, t
        self.exact_name = exact_name or field

    def values(self, elem, pts, phi):
        v = _vals_on(self.space, self.field, self.vec, elem, phi)
        if self.exact is None:
            return v
        return self.exact.exact(self.exact_name, pts, self.t) - v

    def grads(self, elem, pts, gx, gy):
        g = _grads_on(self.space, self.field, self.vec, elem, gx, gy)
        if self.exact is None:
            return g
        return self.exact.exact_grad(self.exact_name, pts, self.t) - g


def _volume_l2sq(space, fe: FieldError, elems) -> float:
    acc = 0.0
    for elem in elems:
        elem = int(elem)
        pts, w, phi, _, _ = space.vol(elem)
        v = fe.values(elem, pts, phi)
        acc += float(np.sum(w * (v * v if v.ndim == 1 else (v * v).sum(axis=1))))
    return acc


def _jump_sq(space, faces, fidxs, fe: FieldError, weight_of) -> float:
    """Sum over faces of weight * |jump|^2; vector jumps in the symmetric
    tensor sense ([[v]]:[[v]] = (|j|^2 + (j.n)^2) / 2 with j the trace
    difference)."""
    acc = 0.0
    vector = space.components(fe.field) == 2
    for fidx in fidxs:
        face = faces.faces[fidx]
        rule = space.face_rule(fidx, face, space.mesh)
        w, n = rule.weights, face.normal
        phi_p, _, _ = space.face_trace(fidx, face, face.elem_plus)
        j = fe.values(face.elem_plus, rule.points, phi_p)
        if face.elem_minus is not None:
            phi_m, _, _ = space.face_trace(fidx, face, face.elem_minus)
            j = j - fe.values(face.elem_minus, rule.points, phi_m)
        if vector:
            jj = 0.5 * ((j * j).sum(axis=1) + (j @ n) ** 2)
        else:
            jj = j * j
        acc += weight_of(face) * float(np.sum(w * jj))
    return acc


def broken_norms(space: DGSpace, faces: FaceSet, params: PhysicalParams, state: dict,
                 exact=None, t: float = 0.0) -> dict:
    """Squared broken norms of a state (or of its error against ``exact``).

    ``state`` maps field names to field-local DOF vectors. Returns a dict
    with keys ``d``, ``p:<j>``, ``u``, ``p`` holding the squared norms.
    """
    out = {}

    fe = FieldError(space, "d", state["d"], exact, t=t)
    acc = 0.0
    for elem in space.el_ids:
        elem = int(elem)
        pts, w, _, gx, gy = space.vol(elem)
        g = fe.grads(elem, pts, gx, gy)
        eps = 0.5 * (g + g.transpose(0, 2, 1))
        tr = eps[:, 0, 0] + eps[:, 1, 1]
        acc += float(np.sum(w * (2 * params.mu_el * (eps * eps).sum(axis=(1, 2))
                                 + params.lam * tr * tr)))
    acc += _jump_sq(space, faces, faces.sipg_faces("d"), fe,
                    lambda f: penalty_coefficients(f, params, space.m).eta)
    out["d"] = acc

    for j in params.compartments:
        field = f"p:{j}"
        kappa = params.k_j[j] / params.mu_j[j]
        fe = FieldError(space, field, state[field], exact, t=t)
        acc = 0.0
        for elem in space.el_ids:
            elem = int(elem)
            pts, w, _, gx, gy = space.vol(elem)
            g = fe.grads(elem, pts, gx, gy)
            acc += kappa * float(np.sum(w * (g * g).sum(axis=1)))
        acc += _jump_sq(space, faces, faces.sipg_faces(field), fe,
                        lambda f: penalty_coefficients(f, params, space.m).zeta[j])
        out[field] = acc

    fe = FieldError(space, "u", state["u"], exact, t=t)
    acc = 0.0
    for elem in space.f_ids:
        elem = int(elem)
        pts, w, _, gx, gy = space.vol(elem)
        g = fe.grads(elem, pts, gx, gy)
        eps = 0.5 * (g + g.transpose(0, 2, 1))
        acc += float(np.sum(w * 2 * params.mu_f * (eps * eps).sum(axis=(1, 2))))
    acc += _jump_sq(space, faces, faces.interior_f, fe,
                    lambda f: penalty_coefficients(f, params, space.m).gamma_v)
    out["u"] = acc

    fe = FieldError(space, "p", state["p"], exact, t=t)
    acc = _volume_l2sq(space, fe, space.f_ids)
    acc += _jump_sq(space, faces, faces.interior_f + faces.dirichlet("u"), fe,
                    lambda f: penalty_coefficients(f, params, space.m).gamma_p)
    out["p"] = acc

    return out


def weighted_l2sq(space: DGSpace, field: str, vec, coeff: float,
                  exact=None, exact_name=None, t: float = 0.0) -> float:
    """coeff * ||field (error)||_{L2}^2 over the field's subdomain."""
    fe = FieldError(space, field, vec, exact, exact_name=exact_name, t=t)
    return coeff * _volume_l2sq(space, fe, space.field_elements(field))


@dataclass
class EnergyBreakdown:
    instantaneous: dict
    integrand: list
    times: list

    @property
    def integral(self) -> float:
        if len(self.times) <= 1:
            # steady convention: constant integrand over a unit time window
            return self.integrand[-1] if self.integrand else 0.0
        return float(np.trapezoid(self.integrand, self.times))

    @property
    def total(self) -> float:
        return float(np.sqrt(sum(self.instantaneous.values()) + self.integral))


def energy_norm(states: list, times: list, space: DGSpace, faces: FaceSet,
                params: PhysicalParams, exact=None) -> EnergyBreakdown:
    """Energy norm of a trajectory (or of its error against ``exact``).

    Instantaneous terms are evaluated at the final state: elastic kinetic
    energy through the velocity surrogate stored under key ``"z"``, the
    displacement broken norm, compartment storage, and fluid kinetic energy.
    The dissipation terms (pressure and fluid broken norms, external
    transfer) are accumulated in time by the composite trapezoidal rule; a
    single-state trajectory uses the steady convention of a unit window.
    """
    if not states:
        raise ValueError("empty trajectory")
    integrand, ts = [], []
    for state, t in zip(states, times):
        bn = broken_norms(space, faces, params, state, exact=exact, t=t)
        term = bn["u"] + bn["p"]
        for j in params.compartments:
            term += bn[f"p:{j}"]
            term += weighted_l2sq(space, f"p:{j}", state[f"p:{j}"], params.beta_ext[j],
                                  exact, t=t)
        integrand.append(term)
        ts.append(t)

    last, t_last = states[-1], times[-1]
    bn = broken_norms(space, faces, params, last, exact=exact, t=t_last)
    inst = {"d": bn["d"]}
    if "z" in last:
        # the Newmark velocity is the discrete surrogate of d-dot
        fe = FieldError(space, "d", last["z"], exact, exact_name="d,t", t=t_last)
        inst["z"] = params.rho_el * _volume_l2sq(space, fe, space.el_ids)
    for j in params.compartments:
        inst[f"p:{j}"] = weighted_l2sq(space, f"p:{j}", last[f"p:{j}"], params.c_j[j],
                                       exact, t=t_last)
    inst["u"] = weighted_l2sq(space, "u", last["u"], params.rho_f, exact, t=t_last)
    return EnergyBreakdown(instantaneous=inst, integrand=integrand, times=ts)


#: errors at or below this floor are treated as saturated, not rated
SATURATION_FLOOR = 1e-13


def convergence_rates(errors, hs):
    """Observed rates log(e_i/e_{i+1}) / log(h_i/h_{i+1}) between consecutive
    meshes; ``None`` marks saturated pairs."""
    errors, hs = list(errors), list(hs)
    if len(errors) < 2:
        raise ValueError("need at least two entries")
    if any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must be strictly decreasing")
    rates = []
    for e1, e2, h1, h2 in zip(errors, errors[1:], hs, hs[1:]):
        if e1 <= SATURATION_FLOOR or e2 <= SATURATION_FLOOR:
            rates.append(None)
        else:
            rates.append(float(np.log(e1 / e2) / np.log(h1 / h2)))
    return rates
