"""Cell-centred finite-volume Laplacian on a uniform grid with embedded boundaries.

Neumann boundaries (the void surface, Neumann lateral walls) are represented
by cut cells: each cell carries its fluid volume fraction and each face its
open-area fraction, both obtained by subsampling the membership predicate.
Dirichlet walls use the symmetric ghost-value treatment of Gibou et al.
(2002): a link to an outside neighbour is replaced by a diagonal term
``1 / (theta h^2)`` where ``theta h`` is the distance from the cell centre to
the wall along the link.

The discrete problem is ``A u = lambda K u`` with ``K = diag(kappa)``; both
matrices are Hermitian, so eigenvalues are real and eigenvectors are
``K``-orthogonal.  One axis may be quasi-periodic with Bloch phase
``exp(i eta)`` across the period, which keeps ``A`` Hermitian.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

KAPPA_MIN = 1e-9
THETA_MIN = 1e-2


@dataclass
class CutCellGrid:
    origin: np.ndarray
    spacing: np.ndarray
    shape: tuple
    periodic_axis: int | None
    index: np.ndarray          # grid-shaped, -1 for inactive cells
    centers: np.ndarray        # (n, d)
    kappa: np.ndarray          # (n,)
    link_i: np.ndarray
    link_j: np.ndarray
    link_w: np.ndarray
    link_wrap: np.ndarray      # j is reached across the period (+1 along the periodic axis)
    dirichlet_diag: np.ndarray
    boundary_points: np.ndarray

    @property
    def n(self) -> int:
        return len(self.kappa)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def stiffness(self, eta: float | None = None) -> sp.csr_matrix:
        """Hermitian stiffness matrix for Bloch parameter ``eta`` (scaled so
        that the mass matrix is ``diag(kappa)``)."""
        phase = 1.0 if eta is None else np.exp(1j * eta)
        if abs(np.imag(phase)) < 1e-15:
            phase = float(np.real(phase))
        i, j, w = self.link_i, self.link_j, self.link_w
        off = np.where(self.link_wrap, phase, 1.0) * w
        diag = np.bincount(i, w, self.n) + np.bincount(j, w, self.n) + self.dirichlet_diag
        rows = np.concatenate([i, j, np.arange(self.n)])
        cols = np.concatenate([j, i, np.arange(self.n)])
        vals = np.concatenate([-off, -np.conj(off), diag])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def mass(self) -> sp.dia_matrix:
        return sp.diags(self.kappa)

    def to_grid(self, values: np.ndarray, fill=np.nan) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=np.result_type(values, float))
        out[self.index >= 0] = values[self.index[self.index >= 0]]
        return out


def _axis_coords(origin, spacing, shape):
    return [origin[a] + spacing[a] * np.arange(shape[a] + 1) for a in range(len(shape))]


def _mesh(coords):
    return np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1)


def _subsample_fraction(pred, lower, spacing, m, free_axes, chunk=20000):
    """Fraction of ``m**k`` subsample points (over ``free_axes``) where ``pred`` holds."""
    s = (np.arange(m) + 0.5) / m
    combos = np.array(list(itertools.product(s, repeat=len(free_axes))))
    offsets = np.zeros((len(combos), lower.shape[1]))
    for col, a in enumerate(free_axes):
        offsets[:, a] = combos[:, col] * spacing[a]
    out = np.empty(len(lower))
    step = max(1, chunk // len(combos))
    for start in range(0, len(lower), step):
        pts = lower[start:start + step, None, :] + offsets[None]
        out[start:start + step] = pred(pts).mean(axis=1)
    return out


def build_grid(origin, spacing, shape, *, fluid=None, dirichlet_inside=None,
               periodic_axis: int | None = None, subsample: int = 6) -> CutCellGrid:
    """Assemble the cut-cell description of a domain on a uniform grid.

    ``fluid(points)`` marks the region kept by Neumann cut cells;
    ``dirichlet_inside(points)`` marks the region bounded by Dirichlet walls.
    Either may be ``None``.  Faces on the outer box are natural Neumann.
    """
    origin = np.asarray(origin, dtype=float)
    spacing = np.asarray(spacing, dtype=float)
    shape = tuple(int(s) for s in shape)
    d = len(shape)
    coords = _axis_coords(origin, spacing, shape)
    centers_grid = _mesh([c[:-1] + 0.5 * h for c, h in zip(coords, spacing)])

    # ---- cell volume fractions
    if fluid is None:
        kappa = np.ones(shape)
        node_vals = None
    else:
        node_vals = fluid(_mesh(coords))
        all_in = np.ones(shape, dtype=bool)
        any_in = np.zeros(shape, dtype=bool)
        for off in itertools.product((0, 1), repeat=d):
            corner = node_vals[tuple(slice(o, o + n) for o, n in zip(off, shape))]
            all_in &= corner
            any_in |= corner
        kappa = all_in.astype(float)
        mixed = any_in & ~all_in
        if mixed.any():
            lower = np.stack([coords[a][:-1][np.nonzero(mixed)[a]] for a in range(d)], axis=1)
            kappa[mixed] = _subsample_fraction(fluid, lower, spacing, subsample, list(range(d)))

    inside_d = np.ones(shape, dtype=bool) if dirichlet_inside is None else dirichlet_inside(centers_grid)
    active = (kappa > KAPPA_MIN) & inside_d

    # ---- face apertures and links
    flat = np.arange(int(np.prod(shape))).reshape(shape)
    li, lj, lw, lwrap = [], [], [], []
    dir_cells, dir_w, bpoints = [], [], []
    for a in range(d):
        other = [b for b in range(d) if b != a]
        periodic = periodic_axis == a
        # faces at node positions k along axis a, spanning cells along the other axes
        ks = np.arange(0 if periodic else 1, shape[a])
        face_shape = list(shape)
        face_shape[a] = len(ks)
        if node_vals is None:
            aper = np.ones(face_shape)
        else:
            nv = np.take(node_vals, ks, axis=a)
            all_in = np.ones(face_shape, dtype=bool)
            any_in = np.zeros(face_shape, dtype=bool)
            for off in itertools.product((0, 1), repeat=d - 1):
                sl = [slice(None)] * d
                for b, o in zip(other, off):
                    sl[b] = slice(o, o + shape[b])
                corner = nv[tuple(sl)]
                all_in &= corner
                any_in |= corner
            aper = all_in.astype(float)
            mixed = any_in & ~all_in
            if mixed.any():
                idx = np.nonzero(mixed)
                lower = np.empty((len(idx[0]), d))
                for b in range(d):
                    lower[:, b] = (coords[a][ks][idx[a]] if b == a else coords[b][:-1][idx[b]])
                aper[mixed] = _subsample_fraction(fluid, lower, spacing, subsample, other)
        right = np.take(flat, ks, axis=a)
        left = np.take(flat, (ks - 1) % shape[a], axis=a)
        wrap = np.zeros(face_shape, dtype=bool)
        if periodic:
            wrap_sl = [slice(None)] * d
            wrap_sl[a] = 0
            wrap[tuple(wrap_sl)] = True
        li.append(left.ravel())
        lj.append(right.ravel())
        lw.append(aper.ravel() / spacing[a] ** 2)
        lwrap.append(wrap.ravel())

        if dirichlet_inside is not None:
            for sign in (-1, 1):
                nb = np.roll(inside_d, -sign, axis=a)
                if not periodic:
                    edge = [slice(None)] * d
                    edge[a] = -1 if sign == 1 else 0
                    nb[tuple(edge)] = False
                cand = active & ~nb
                if not cand.any():
                    continue
                cidx = np.nonzero(cand)
                p0 = centers_grid[cidx]
                step = np.zeros(d)
                step[a] = sign * spacing[a]
                lo, hi = np.zeros(len(p0)), np.ones(len(p0))
                for _ in range(48):
                    mid = 0.5 * (lo + hi)
                    ok = dirichlet_inside(p0 + mid[:, None] * step)
                    lo = np.where(ok, mid, lo)
                    hi = np.where(ok, hi, mid)
                theta = np.maximum(0.5 * (lo + hi), THETA_MIN)
                dir_cells.append(flat[cidx])
                dir_w.append(1.0 / (theta * spacing[a] ** 2))
                bpoints.append(p0 + theta[:, None] * step)

    li = np.concatenate(li)
    lj = np.concatenate(lj)
    lw = np.concatenate(lw)
    lwrap = np.concatenate(lwrap)
    act_flat = active.ravel()
    keep = act_flat[li] & act_flat[lj] & (lw > 0)
    li, lj, lw, lwrap = li[keep], lj[keep], lw[keep], lwrap[keep]
    ncell = flat.size
    ddiag = np.zeros(ncell)
    if dir_cells:
        np.add.at(ddiag, np.concatenate(dir_cells), np.concatenate(dir_w))
        bpts = np.concatenate(bpoints)
    else:
        bpts = np.zeros((0, d))

    # ---- keep the largest connected component with at least one coupling
    adj = sp.coo_matrix((np.ones(len(li)), (li, lj)), shape=(ncell, ncell))
    coupled = np.zeros(ncell, dtype=bool)
    coupled[li] = True
    coupled[lj] = True
    coupled |= ddiag > 0
    candidates = act_flat & coupled
    ncomp, labels = connected_components(adj, directed=False)
    if candidates.any():
        sizes = np.bincount(labels[candidates], minlength=ncomp)
        main = np.argmax(sizes)
        act_flat = candidates & (labels == main)
    else:
        act_flat = candidates
    keep = act_flat[li] & act_flat[lj]
    li, lj, lw, lwrap = li[keep], lj[keep], lw[keep], lwrap[keep]

    index = -np.ones(ncell, dtype=np.int64)
    index[act_flat] = np.arange(act_flat.sum())
    return CutCellGrid(
        origin=origin, spacing=spacing, shape=shape, periodic_axis=periodic_axis,
        index=index.reshape(shape),
        centers=centers_grid.reshape(-1, d)[act_flat],
        kappa=kappa.ravel()[act_flat],
        link_i=index[li], link_j=index[lj], link_w=lw, link_wrap=lwrap,
        dirichlet_diag=ddiag[act_flat],
        boundary_points=bpts,
    )
