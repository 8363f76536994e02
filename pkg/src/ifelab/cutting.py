"""Whole-mesh interface layout: shared edge crossings, element classes, cuts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .geometry import (
    INTERFACE,
    INTERIOR_MINUS,
    INTERIOR_PLUS,
    CutElement,
    EdgeCrossing,
    GeometryError,
    LevelSet,
    _element_cut_config,
    build_cut_from_points,
    edge_cuts_batch,
    on_interface_vertices,
)


@dataclass
class CutLayout:
    """Classification of every element plus cut data for interface elements.

    Edge crossings are computed once per edge and shared by both adjacent
    elements, so the chord polyline is globally consistent.
    """

    classes: np.ndarray                 # (n_elem,) INTERIOR_PLUS/MINUS or INTERFACE
    cuts: Dict[int, CutElement]         # elem id -> cut data
    edge_splits: Dict[int, np.ndarray]  # edge id -> interface crossing point
    interface_edges: np.ndarray         # sorted ids of open-edge crossings

    @property
    def interface_elements(self) -> np.ndarray:
        return np.nonzero(self.classes == INTERFACE)[0]


def build_layout(mesh, ls: LevelSet) -> CutLayout:
    nodes = mesh.nodes
    p0 = nodes[mesh.edges[:, 0]]
    p1 = nodes[mesh.edges[:, 1]]
    has_cut, t, snapped, endpoint = edge_cuts_batch(p0, p1, ls)
    vertex_flags = on_interface_vertices(nodes, ls, mesh.h)

    open_cut = has_cut & ~snapped
    points = p0 + t[:, None] * (p1 - p0)
    edge_splits = {int(e): points[e] for e in np.nonzero(open_cut)[0]}

    # candidates: any element touching a cut edge or an on-interface node
    touched = np.zeros(mesh.n_elements, dtype=bool)
    if np.any(has_cut):
        for eid in np.nonzero(has_cut)[0]:
            for t_adj in mesh.edge_elems[eid]:
                if t_adj >= 0:
                    touched[t_adj] = True
    if np.any(vertex_flags):
        touched |= vertex_flags[mesh.elements].any(axis=1)

    phi_centroid = np.asarray(ls.phi(mesh.element_centroids()), float)
    phi_nodes = np.asarray(ls.phi(nodes), float)
    classes = np.where(phi_centroid >= 0, INTERIOR_PLUS, INTERIOR_MINUS)
    tie = phi_centroid == 0.0
    if np.any(tie):
        vsum = phi_nodes[mesh.elements].sum(axis=1)
        classes[tie] = np.where(vsum[tie] >= 0, INTERIOR_PLUS, INTERIOR_MINUS)

    cuts: Dict[int, CutElement] = {}
    nv = mesh.elements.shape[1]
    for e in np.nonzero(touched)[0]:
        verts = nodes[mesh.elements[e]]
        crossings = []
        for i in range(nv):
            eid = int(mesh.elem_edges[e, i])
            if not has_cut[eid]:
                crossings.append(None)
                continue
            # translate the stored crossing into this element's edge orientation
            a = int(mesh.elements[e, i])
            same = a == int(mesh.edges[eid, 0])
            if snapped[eid]:
                ep = int(endpoint[eid])
                crossings.append(EdgeCrossing(points[eid], float(ep), True,
                                              ep if same else 1 - ep))
            else:
                tt = float(t[eid]) if same else 1.0 - float(t[eid])
                crossings.append(EdgeCrossing(points[eid], tt, False, None))
        von = vertex_flags[mesh.elements[e]]
        try:
            cfg = _element_cut_config(verts, crossings, von)
        except GeometryError as err:
            raise type(err)(f"element {e}: {err}") from err
        if cfg is None:
            continue
        loc_d, D, loc_e, E = cfg
        cut = build_cut_from_points(int(e), verts, loc_d, D, loc_e, E, ls)
        gids = []
        if loc_d[0] == "edge":
            gids.append(int(mesh.elem_edges[e, loc_d[1]]))
        gids.append(int(mesh.elem_edges[e, loc_e[1]]))
        cut.cut_edges = tuple(gids)
        cuts[int(e)] = cut
        classes[e] = INTERFACE

    iface_edges = np.sort(np.nonzero(open_cut)[0])
    layout = CutLayout(classes, cuts, edge_splits, iface_edges)
    _check_interface_edge_neighbors(mesh, layout)
    return layout


def _check_interface_edge_neighbors(mesh, layout: CutLayout):
    """Every interior cut edge must sit between two interface elements."""
    for eid in layout.interface_edges:
        for t_adj in mesh.edge_elems[eid]:
            if t_adj >= 0 and layout.classes[t_adj] != INTERFACE:
                raise GeometryError(
                    f"edge {int(eid)} is crossed by the interface but element "
                    f"{int(t_adj)} is not an interface element; mesh too coarse")
