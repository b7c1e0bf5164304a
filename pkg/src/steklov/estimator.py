"""Residual a posteriori error estimator for the discrete Steklov pair.

For the lowest-order method the projected solution is affine on each cell, so
the interior residual vanishes identically and the estimator reduces to the
stabilization energy plus weighted edge terms:

* interior edges carry half the normal-flux jump of the projected gradients,
* spectral-boundary edges carry ``lambda_h * w - grad(Pi w) . n`` (affine
  along the edge),
* reflecting-boundary edges carry the spurious normal flux ``-grad(Pi w) . n``.

Each squared edge residual is integrated exactly (two-point Gauss handles the
quadratic integrand) and every edge contributes to all incident cells, scaled
by that cell's diameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolver import SpectralPair
from .mesh import BoundaryTag, PolygonalMesh
from .quadrature import gauss_edge_rule
from .vem import GlobalSystem, project_solution, projected_gradients

__all__ = [
    "EdgeResidual",
    "ElementIndicator",
    "GlobalEstimate",
    "edge_residuals",
    "element_indicators",
    "global_estimate",
]

_EDGE_RULE = gauss_edge_rule(2)

_INTERIOR = list(BoundaryTag).index(BoundaryTag.INTERIOR)
_GAMMA0 = list(BoundaryTag).index(BoundaryTag.GAMMA0)
_GAMMA1 = list(BoundaryTag).index(BoundaryTag.GAMMA1)


@dataclass(frozen=True)
class EdgeResidual:
    """Affine edge residual, stored by its endpoint values along (a, b)."""

    edge: int
    tag: BoundaryTag
    value_a: float
    value_b: float
    norm2: float  # integral of the squared residual over the edge


@dataclass(frozen=True)
class ElementIndicator:
    """Squared estimator contributions of one cell."""

    cell: int
    theta2: float  # stabilization energy of the projection complement
    r2: float      # interior residual (identically zero at lowest order)
    jump2: float   # diameter-weighted edge residuals of the cell's edges

    @property
    def eta2(self) -> float:
        return self.theta2 + self.r2 + self.jump2

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.eta2))


@dataclass(frozen=True)
class GlobalEstimate:
    eta2: float
    theta2_total: float
    r2_total: float
    jump2_total: float
    effectivity: float | None


def _edge_residual_values(
    mesh: PolygonalMesh,
    gradients: np.ndarray,
    lambda_h: float,
    trace: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Endpoint values and exact squared norms of all edge residuals.

    Returns ``(value_a, value_b, norm2)`` indexed by edge id.  The normal is
    the outward normal of each edge's left cell, so interior jumps are
    orientation independent up to sign and their squared norms are well
    defined.
    """
    arrays = mesh.edge_arrays()
    a = arrays["a"]
    b = arrays["b"]
    tag = arrays["tag"]
    pa = mesh.vertices[a]
    pb = mesh.vertices[b]
    tangent = pb - pa
    length = np.hypot(tangent[:, 0], tangent[:, 1])
    nx = tangent[:, 1] / length
    ny = -tangent[:, 0] / length

    grad_left = gradients[arrays["left"]]
    flux_left = grad_left[:, 0] * nx + grad_left[:, 1] * ny

    value_a = np.empty(len(a))
    value_b = np.empty(len(a))

    interior = tag == _INTERIOR
    grad_right = gradients[np.where(arrays["right"] >= 0, arrays["right"], 0)]
    flux_right = grad_right[:, 0] * nx + grad_right[:, 1] * ny
    half_jump = 0.5 * (flux_left - flux_right)
    value_a[interior] = half_jump[interior]
    value_b[interior] = half_jump[interior]

    spectral = tag == _GAMMA0
    value_a[spectral] = lambda_h * trace[a[spectral]] - flux_left[spectral]
    value_b[spectral] = lambda_h * trace[b[spectral]] - flux_left[spectral]

    reflecting = tag == _GAMMA1
    value_a[reflecting] = -flux_left[reflecting]
    value_b[reflecting] = -flux_left[reflecting]

    nodes = _EDGE_RULE.nodes
    vals = value_a[:, None] * (1.0 - nodes)[None, :] + value_b[:, None] * nodes[None, :]
    norm2 = length * ((vals * vals) @ _EDGE_RULE.weights)
    return value_a, value_b, norm2


def edge_residuals(
    mesh: PolygonalMesh,
    gradients: np.ndarray,
    lambda_h: float,
    trace: np.ndarray,
) -> list[EdgeResidual]:
    """Per-edge affine residuals of a projected eigenpair.

    ``gradients`` holds the constant projected gradient of each cell and
    ``trace`` the dof vector of the eigenfunction.
    """
    value_a, value_b, norm2 = _edge_residual_values(mesh, gradients, lambda_h, trace)
    return [
        EdgeResidual(
            edge=eid,
            tag=edge.tag,
            value_a=float(value_a[eid]),
            value_b=float(value_b[eid]),
            norm2=float(norm2[eid]),
        )
        for eid, edge in enumerate(mesh.edges)
    ]


def element_indicators(system: GlobalSystem, pair: SpectralPair) -> list[ElementIndicator]:
    """Squared error indicators of every cell for one normalized eigenpair."""
    if not pair.normalized:
        raise ValueError("indicator evaluation expects a boundary-mass-normalized pair")
    mesh = system.mesh
    w = pair.vector

    coeffs = project_solution(system, w)
    gradients = projected_gradients(system, coeffs)
    _, _, norm2 = _edge_residual_values(mesh, gradients, pair.value, w)

    theta2 = np.empty(mesh.n_cells)
    for group in system.groups:
        local = w[group.dofs]
        theta2[group.ids] = np.einsum("mi,mij,mj->m", local, group.stabilization, local)

    edge_sums = np.zeros(mesh.n_cells)
    halfedge_edge = np.concatenate(mesh.cell_edges)
    owner = np.repeat(
        np.arange(mesh.n_cells), [len(ce) for ce in mesh.cell_edges]
    )
    np.add.at(edge_sums, owner, norm2[halfedge_edge])
    jump2 = system.diameters * edge_sums

    return [
        ElementIndicator(cell=cid, theta2=float(theta2[cid]), r2=0.0, jump2=float(jump2[cid]))
        for cid in range(mesh.n_cells)
    ]


def global_estimate(
    indicators: list[ElementIndicator],
    lambda_h: float | None = None,
    reference: float | None = None,
) -> GlobalEstimate:
    """Aggregate element indicators; attach an effectivity index when a
    reference eigenvalue is supplied alongside the computed one."""
    theta2 = float(sum(ind.theta2 for ind in indicators))
    r2 = float(sum(ind.r2 for ind in indicators))
    jump2 = float(sum(ind.jump2 for ind in indicators))
    eta2 = theta2 + r2 + jump2
    effectivity = None
    if lambda_h is not None and reference is not None:
        if eta2 <= 0.0:
            raise ValueError("effectivity is undefined for a zero estimate")
        effectivity = abs(reference - lambda_h) / eta2
    return GlobalEstimate(
        eta2=eta2,
        theta2_total=theta2,
        r2_total=r2,
        jump2_total=jump2,
        effectivity=effectivity,
    )
