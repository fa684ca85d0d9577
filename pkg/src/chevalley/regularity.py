"""Empirical Whitney 1-regularity of the image of a ball under the
invariant map, plus the boundary-graph machinery it rests on.

Geodesics in the image are measured on a graph: the closed chamber (a
fundamental domain) is meshed, the mesh is pushed through the invariant map,
and edge weights are Euclidean distances between image points.  Graph path
length over straight-line image distance then estimates the geodesic ratio;
the supremum of that ratio over pairs is the quantity whose finiteness is
being certified.  Pair sampling is biased toward the image boundary, where
the cusps live.

The module also computes the lift derivatives d p_{k+1} / d p_j on strata
(bounded, with continuous extension toward the origin) and the min/max
envelope graphs over the base image, both as binned tables from mesh data
and as solver-exact values at matched targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .coxeter import RootSystem, Stratum, enumerate_strata, sample_stratum
from .errors import CapabilityError, ConvergenceError, UsageError
from .invariants import InvariantBasis
from .probe import _project_batch, _rng

MESH_POINT_BUDGET = 8_000_000


@dataclass
class ChamberMesh:
    vertices: np.ndarray        # (V, n), all in the chamber and the radius ball
    edges: np.ndarray           # (E, 2) int
    pitch: float
    radius: float

    @property
    def size(self) -> int:
        return len(self.vertices)


def build_chamber_mesh(rs: RootSystem, a: float, h: float) -> ChamberMesh:
    """Grid points of pitch h inside (chamber) & (ball of radius a), with
    wall, wall-pair and sphere projections snapped on; edges join vertices
    within sqrt(n) * h.

    A disconnected mesh triggers one retry at half pitch.
    """
    if h > a / 4 + 1e-12:
        raise UsageError("mesh pitch must satisfy h <= a/4")
    for attempt in range(2):
        mesh = _build_mesh_once(rs, a, h)
        adj = csr_matrix(
            (np.ones(len(mesh.edges)), (mesh.edges[:, 0], mesh.edges[:, 1])),
            shape=(mesh.size, mesh.size),
        )
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp == 1:
            return mesh
        h *= 0.5
    raise ConvergenceError("chamber mesh is disconnected even after refinement")


def _build_mesh_once(rs: RootSystem, a: float, h: float) -> ChamberMesh:
    n = rs.n
    idx = np.arange(-int(np.floor(a / h + 1e-9)), int(np.floor(a / h + 1e-9)) + 1)
    if (len(idx)) ** n > MESH_POINT_BUDGET:
        raise CapabilityError("mesh would exceed the desk-scale point budget")
    axes = [idx * h] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    keep = rs.chamber_contains_many(grid, tol=1e-12)
    keep &= np.linalg.norm(grid, axis=1) <= a + 1e-12
    pts = [grid[keep]]

    base = pts[0]
    walls = rs.simple_unit_f
    dots = base @ walls.T
    # single-wall projections
    for i in range(len(walls)):
        near = (dots[:, i] > 0) & (dots[:, i] <= h)
        if np.any(near):
            proj = base[near] - np.outer(dots[near, i], walls[i])
            pts.append(proj)
    # wall-pair projections (edges of the chamber cone)
    for i in range(len(walls)):
        for j in range(i + 1, len(walls)):
            near = (dots[:, i] <= h) & (dots[:, j] <= h)
            if not np.any(near):
                continue
            A = walls[[i, j]]
            # orthogonal projection onto the intersection of both walls
            gram_inv = np.linalg.pinv(A @ A.T)
            proj = base[near] - (A.T @ (gram_inv @ (A @ base[near].T))).T
            pts.append(proj)
    cand = np.concatenate(pts, axis=0)
    # sphere snapping for everything near the outer boundary
    norms = np.linalg.norm(cand, axis=1)
    near_sphere = (norms >= a - h) & (norms > 1e-12)
    if np.any(near_sphere):
        snapped = cand[near_sphere] * (a / norms[near_sphere])[:, None]
        cand = np.concatenate([cand, snapped], axis=0)

    keep = rs.chamber_contains_many(cand, tol=1e-12)
    keep &= np.linalg.norm(cand, axis=1) <= a + 1e-12
    cand = cand[keep]
    quant = np.round(cand / (1e-9 * max(a, 1.0))).astype(np.int64)
    _, uniq = np.unique(quant, axis=0, return_index=True)
    verts = cand[np.sort(uniq)]
    order = np.lexsort(verts.T[::-1])
    verts = verts[order]

    tree = cKDTree(verts)
    edges = tree.query_pairs(np.sqrt(n) * h * (1 + 1e-9), output_type="ndarray")
    return ChamberMesh(verts, edges, h, a)


@dataclass
class ImageGraph:
    mesh: ChamberMesh
    image: np.ndarray           # (V, n) full invariant map of every vertex
    graph: csr_matrix           # symmetric weighted adjacency
    near_boundary: np.ndarray   # vertex mask: within 2h of some chamber wall

    @property
    def size(self) -> int:
        return len(self.image)


def build_image_graph(basis: InvariantBasis, rs: RootSystem, mesh: ChamberMesh) -> ImageGraph:
    img = basis.compiled.P(mesh.vertices)
    u, v = mesh.edges[:, 0], mesh.edges[:, 1]
    w = np.linalg.norm(img[u] - img[v], axis=1)
    w = np.maximum(w, 1e-300)  # distinct chamber points have distinct images
    graph = csr_matrix(
        (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
        shape=(mesh.size, mesh.size),
    )
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp != 1:
        raise ConvergenceError("image graph is disconnected")
    near = np.min(mesh.vertices @ rs.simple_unit_f.T, axis=1) <= 2 * mesh.pitch
    return ImageGraph(mesh, img, graph, near)


@dataclass
class RatioReport:
    pitch: float
    n_pairs: int
    max_ratio: float
    p99_ratio: float
    min_ratio: float
    refinement: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pitch": self.pitch,
            "n_pairs": self.n_pairs,
            "max_ratio": self.max_ratio,
            "p99_ratio": self.p99_ratio,
            "min_ratio": self.min_ratio,
            "refinement": self.refinement,
        }


RESOLUTION_FLOOR_FACTOR = 6.0


def _image_resolution(g: ImageGraph, idx: np.ndarray) -> np.ndarray:
    """Local image-space resolution of the graph at the given vertices:
    the typical (median) incident edge length in image coordinates."""
    res = np.zeros(len(idx))
    graph = g.graph
    for pos, v in enumerate(idx):
        row = graph.data[graph.indptr[v]:graph.indptr[v + 1]]
        res[pos] = float(np.median(row)) if len(row) else 0.0
    return res


def _sample_pair_positions(
    g: ImageGraph, pairs: int, seed: int, near_boundary_frac: float,
    targets_per_source: int,
):
    """Pair endpoints as chamber positions (reusable across pitches)."""
    rng = _rng(seed)
    V = g.size
    near_idx = np.flatnonzero(g.near_boundary)
    if len(near_idx) == 0:
        near_idx = np.arange(V)
    n_sources = max(1, pairs // targets_per_source)
    n_near = int(round(n_sources * near_boundary_frac))
    src = []
    tgt = []
    for s_i in range(n_sources):
        pool = near_idx if s_i < n_near else np.arange(V)
        s = pool[rng.integers(0, len(pool))]
        t = pool[rng.integers(0, len(pool), size=targets_per_source)]
        src.append(s)
        tgt.append(t)
    src = np.array(src)
    tgt = np.array(tgt)
    return g.mesh.vertices[src], g.mesh.vertices[tgt.reshape(-1)].reshape(
        tgt.shape + (g.mesh.vertices.shape[1],)
    )


def _snap_indices(g: ImageGraph, src_pos, tgt_pos):
    tree = cKDTree(g.mesh.vertices)
    _, src_idx = tree.query(src_pos)
    flat_t = tgt_pos.reshape(-1, tgt_pos.shape[-1])
    _, tgt_idx = tree.query(flat_t)
    return src_idx, tgt_idx.reshape(tgt_pos.shape[:-1])


def _admit_pairs(g: ImageGraph, src_idx, tgt_idx, floor_factor: float) -> np.ndarray:
    """Mask of pairs the graph can resolve: image separation above
    `floor_factor` local image edge lengths.  Pairs below that floor would
    only measure discretization noise, not geometry."""
    mask = np.zeros(tgt_idx.shape, dtype=bool)
    for row in range(len(src_idx)):
        t = tgt_idx[row]
        eu = np.linalg.norm(g.image[t] - g.image[src_idx[row]], axis=1)
        floor = floor_factor * np.maximum(
            _image_resolution(g, t),
            _image_resolution(g, np.full(len(t), src_idx[row])),
        )
        mask[row] = eu > np.maximum(floor, 1e-12)
    return mask


def _ratio_stats_for_pairs(g: ImageGraph, src_pos, tgt_pos, mask,
                           table: list | None = None) -> RatioReport:
    """Graph/Euclidean ratios for an explicit, pre-admitted pair set.

    When `table` is given, one (source, target, euclid, geodesic, ratio)
    row per pair is appended to it for CSV export.
    """
    src_idx, tgt_idx = _snap_indices(g, src_pos, tgt_pos)
    ratios = []
    for lo in range(0, len(src_idx), 128):
        chunk = src_idx[lo:lo + 128]
        dist = dijkstra(g.graph, directed=False, indices=chunk)
        for row in range(len(chunk)):
            t = tgt_idx[lo + row][mask[lo + row]]
            if len(t) == 0:
                continue
            eu = np.linalg.norm(g.image[t] - g.image[chunk[row]], axis=1)
            rr = dist[row, t] / eu
            ratios.append(rr)
            if table is not None:
                for j in range(len(t)):
                    table.append((int(chunk[row]), int(t[j]),
                                  float(eu[j]), float(dist[row, t[j]]),
                                  float(rr[j])))
    if not ratios:
        raise UsageError("no pair exceeded the graph's image resolution")
    r = np.concatenate(ratios)
    r = r[np.isfinite(r)]
    if len(r) == 0:
        raise UsageError("no finite pair ratios")
    return RatioReport(
        pitch=g.mesh.pitch,
        n_pairs=int(len(r)),
        max_ratio=float(np.max(r)),
        p99_ratio=float(np.quantile(r, 0.99)),
        min_ratio=float(np.min(r)),
    )


def whitney_ratio(
    g: ImageGraph,
    pairs: int = 5000,
    seed: int = 0,
    near_boundary_frac: float = 0.5,
    targets_per_source: int = 20,
    floor_factor: float = RESOLUTION_FLOOR_FACTOR,
    pair_table: list | None = None,
) -> RatioReport:
    """Geodesic-to-Euclidean ratio statistics over random vertex pairs.

    Half of the pairs (by default) have both endpoints within two pitches of
    a chamber wall, where 1-regularity is actually at stake.  Pairs are
    grouped by source so one Dijkstra sweep serves many targets; pairs below
    the graph's image resolution are excluded (see _admit_pairs).
    """
    src_pos, tgt_pos = _sample_pair_positions(
        g, pairs, seed, near_boundary_frac, targets_per_source
    )
    src_idx, tgt_idx = _snap_indices(g, src_pos, tgt_pos)
    mask = _admit_pairs(g, src_idx, tgt_idx, floor_factor)
    return _ratio_stats_for_pairs(g, src_pos, tgt_pos, mask, table=pair_table)


def whitney_study(
    basis: InvariantBasis,
    rs: RootSystem,
    a: float,
    h: float,
    pairs: int = 5000,
    seed: int = 0,
    floor_factor: float = RESOLUTION_FLOOR_FACTOR,
) -> RatioReport:
    """Ratio statistics at pitch h and h/2 on one fixed pair set.

    Pairs are drawn and admitted once on the coarse mesh (grid points of the
    coarse lattice are grid points of the fine one) and the same set is
    re-evaluated after refinement, so the stability delta compares like with
    like rather than chasing newly resolvable pairs.
    """
    mesh = build_chamber_mesh(rs, a, h)
    g = build_image_graph(basis, rs, mesh)
    src_pos, tgt_pos = _sample_pair_positions(g, pairs, seed, 0.5, 20)
    src_idx, tgt_idx = _snap_indices(g, src_pos, tgt_pos)
    mask = _admit_pairs(g, src_idx, tgt_idx, floor_factor)
    reports = [_ratio_stats_for_pairs(g, src_pos, tgt_pos, mask)]
    mesh2 = build_chamber_mesh(rs, a, h / 2)
    g2 = build_image_graph(basis, rs, mesh2)
    reports.append(_ratio_stats_for_pairs(g2, src_pos, tgt_pos, mask))
    out = reports[0]
    out.refinement = [
        {"pitch": r.pitch, "max_ratio": r.max_ratio, "p99_ratio": r.p99_ratio,
         "n_pairs": r.n_pairs}
        for r in reports
    ]
    out.refinement.append({
        "max_ratio_rel_change": abs(reports[1].max_ratio - reports[0].max_ratio)
        / reports[0].max_ratio
    })
    return out


def image_pair_ratio(g: ImageGraph, x_from, x_to) -> float:
    """Geodesic/Euclidean ratio between the image points of two chamber
    points, snapped to their nearest mesh vertices."""
    tree = cKDTree(g.mesh.vertices)
    _, i = tree.query(np.asarray(x_from, dtype=float))
    _, j = tree.query(np.asarray(x_to, dtype=float))
    dist = dijkstra(g.graph, directed=False, indices=[i])[0, j]
    eu = float(np.linalg.norm(g.image[i] - g.image[j]))
    if eu == 0:
        raise UsageError("image points coincide")
    return float(dist) / eu


# ---------------------------------------------------------------------------
# lift derivatives on strata
# ---------------------------------------------------------------------------


def lift_derivatives(
    basis: InvariantBasis,
    rs: RootSystem,
    stratum: Stratum,
    samples: int = 50,
    radius: float = 1.0,
    seed: int = 23,
    points: np.ndarray | None = None,
):
    """Gradients (d p_{k+1} / d p_j)_{j=1..k} along a dimension-k stratum.

    Solved per sample from the k x k system expressed in stratum
    coordinates; a singular system at an interior sample would contradict
    the rank-k property and raises.  Returns (points, gradients).
    """
    k = stratum.dim
    if k < 1:
        raise UsageError("lift derivatives need a stratum of dimension >= 1")
    if k >= len(basis.polys):
        raise UsageError("lift derivatives need k < n")
    X = points if points is not None else sample_stratum(
        stratum, samples, radius, seed, rs
    )
    B = stratum.basis  # (n, k)
    G = basis.compiled.J(X, k + 1)           # (S, k+1, n)
    M = np.einsum("sjn,nk->sjk", G[:, :k, :], B)   # (S, k, k): rows j, cols k
    M = np.swapaxes(M, 1, 2)                       # system matrix (grad p_j . B)
    rhs = np.einsum("sn,nk->sk", G[:, k, :], B)
    # column j scales like |x|^(deg_j - 1); equilibrate before conditioning
    col = np.linalg.norm(M, axis=1, keepdims=True)
    if np.any(col <= 0):
        raise ConvergenceError(
            f"degenerate lift system on stratum {stratum.stratum_id}"
        )
    Me = M / col
    conds = np.linalg.cond(Me)
    if np.any(conds > 1e12):
        raise ConvergenceError(
            f"singular lift system on stratum {stratum.stratum_id}; "
            "this contradicts the rank-k property"
        )
    grads = np.linalg.solve(Me, rhs[..., None])[..., 0] / col[:, 0, :]
    return X, grads


# ---------------------------------------------------------------------------
# envelopes over the base image
# ---------------------------------------------------------------------------


@dataclass
class EnvelopeTable:
    k: int
    cell_edges: list[np.ndarray]
    env_min: np.ndarray
    env_max: np.ndarray
    counts: np.ndarray
    lipschitz_min: float
    lipschitz_max: float
    containment_violations: int
    empty_interior_cells: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "cells": [len(e) - 1 for e in self.cell_edges],
            "populated_cells": int(np.sum(self.counts > 0)),
            "lipschitz_min_envelope": self.lipschitz_min,
            "lipschitz_max_envelope": self.lipschitz_max,
            "containment_violations": self.containment_violations,
            "empty_interior_cells": self.empty_interior_cells,
        }


def envelope_functions(
    basis: InvariantBasis,
    rs: RootSystem,
    k: int,
    a: float,
    mesh: ChamberMesh | None = None,
    h: float | None = None,
    cells: int = 40,
    stratum_samples: int = 4000,
    seed: int = 31,
) -> EnvelopeTable:
    """Min/max of p_{k+1} per cell of a grid over the image of the ball
    under P_k, from mesh points plus dense samples of the k-dim strata
    (whose images carry the envelope graphs).
    """
    if k >= len(basis.polys):
        raise UsageError("envelopes need k < n")
    if mesh is None:
        mesh = build_chamber_mesh(rs, a, h if h is not None else a / 24)
    pts = [mesh.vertices]
    for s in enumerate_strata(rs):
        if s.dim == k:
            pts.append(sample_stratum(s, stratum_samples, a, seed, rs))
    X = np.concatenate(pts, axis=0)
    X = X[np.linalg.norm(X, axis=1) <= a + 1e-12]
    vals = basis.compiled.P(X, k + 1)
    base, height = vals[:, :k], vals[:, k]

    edges = []
    for j in range(k):
        lo, hi = float(np.min(base[:, j])), float(np.max(base[:, j]))
        pad = 1e-9 * max(1.0, abs(hi - lo))
        edges.append(np.linspace(lo - pad, hi + pad, cells + 1))
    idx = np.zeros(len(X), dtype=np.int64)
    for j in range(k):
        bj = np.clip(np.digitize(base[:, j], edges[j]) - 1, 0, cells - 1)
        idx = idx * cells + bj
    shape = (cells,) * k
    env_min = np.full(cells ** k, np.inf)
    env_max = np.full(cells ** k, -np.inf)
    counts = np.zeros(cells ** k, dtype=np.int64)
    np.minimum.at(env_min, idx, height)
    np.maximum.at(env_max, idx, height)
    np.add.at(counts, idx, 1)

    violations = int(np.sum((height < env_min[idx] - 1e-12) | (height > env_max[idx] + 1e-12)))

    env_min_g = env_min.reshape(shape)
    env_max_g = env_max.reshape(shape)
    counts_g = counts.reshape(shape)
    lip_min = _envelope_lipschitz(env_min_g, counts_g, edges)
    lip_max = _envelope_lipschitz(env_max_g, counts_g, edges)
    empty_interior = _empty_interior_cells(counts_g)
    return EnvelopeTable(
        k, edges, env_min_g, env_max_g, counts_g,
        lip_min, lip_max, violations, empty_interior,
    )


def _envelope_lipschitz(env: np.ndarray, counts: np.ndarray, edges) -> float:
    out = 0.0
    k = env.ndim
    for axis in range(k):
        width = float(edges[axis][1] - edges[axis][0])
        a = np.moveaxis(env, axis, 0)
        c = np.moveaxis(counts, axis, 0)
        both = (c[1:] > 0) & (c[:-1] > 0)
        diffs = np.abs(a[1:][both] - a[:-1][both])
        if len(diffs):
            out = max(out, float(np.max(diffs)) / width)
    return out


def _empty_interior_cells(counts: np.ndarray) -> int:
    """Empty cells with populated cells on both sides along the first axis
    (a cheap interior-resolution warning count)."""
    k = counts.ndim
    c = counts.reshape(counts.shape[0], -1)
    total = 0
    for col in range(c.shape[1]):
        col_counts = c[:, col]
        pop = np.flatnonzero(col_counts > 0)
        if len(pop) >= 2:
            inside = col_counts[pop[0]:pop[-1] + 1]
            total += int(np.sum(inside == 0))
    _ = k
    return total


def envelope_at(
    basis: InvariantBasis,
    rs: RootSystem,
    k: int,
    m,
    strata: list[Stratum] | None = None,
    seed: int = 5,
):
    """Solver-exact envelope values at one target: p_{k+1} on each
    dimension-k stratum solving P_k = m within the stratum span.

    The boundary of the image over the base is carried by these stratum
    graphs, so their min/max are the envelope values at m.  Strata whose
    graph does not reach m are skipped.  Returns (lo, hi, per-stratum dict).
    """
    if strata is None:
        strata = enumerate_strata(rs)
    m = np.asarray(m, dtype=float)
    cb = basis.compiled
    rng = _rng(seed)
    per = {}
    for s in strata:
        if s.dim != k:
            continue
        B = s.basis

        class _Restricted:
            def P(self, Y, kk):
                return cb.P(Y @ B.T, kk)

            def J(self, Y, kk):
                return np.einsum("bkn,nj->bkj", cb.J(Y @ B.T, kk), B)

        values = []
        anchor_y = B.T @ s.anchor
        scale = float(np.sqrt(abs(m[0]))) if basis.degrees[0] == 2 and m[0] > 0 else 1.0
        Y0 = anchor_y[None, :] * scale + 0.3 * scale * rng.normal(size=(16, k))
        Y, ok = _project_batch(_Restricted(), k, m, Y0, max_iter=80)
        X = Y[ok] @ B.T
        if len(X):
            inside = rs.chamber_contains_many(X, tol=1e-9 * max(scale, 1.0))
            X = X[inside]
        if len(X):
            vals = cb.P(X, k + 1)[:, k]
            values = [float(np.min(vals)), float(np.max(vals))]
            per[s.stratum_id] = values
    if not per:
        raise ConvergenceError("no stratum graph reaches this target")
    lo = min(v[0] for v in per.values())
    hi = max(v[1] for v in per.values())
    return lo, hi, per
