"""Exact reduced states of code states at any chain length.

Dense statevectors stop at ~2**20 amplitudes, but every quantity the
analysis needs (reduced density matrices, recovery errors, decoupling
defects) lives on a small region.  This module contracts only the past
causal cone of the region and keeps the traced legs as an explicit
*environment* index, yielding a thin purification factor

    F[region_sites..., cone_top_sites..., env]

such that for a top input rho the reduced state on the region is
``sum_env (F rho-half) (F rho-half)^dag`` after pairing the environment
and the non-cone top legs.  Tensors outside the cone compose to an
isometry on the traced side, so all factored quantities (trace distances,
fidelities, recovery errors) equal their uncompressed values exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import MeraNetwork, Region, RegionError, causal_cone

_ENV_COMPRESS_THRESHOLD = 4096
_ENV_COMPRESS_CUTOFF = 1e-14


@dataclass
class CodeFactor:
    """Thin purification factor for a region of an encoded state.

    ``tensor`` has axes ``region sites (sorted) + cone-top sites (sorted)
    + env``; ``noncone_top`` lists the top sites whose legs pair directly
    between ket and bra (their subtree never reaches the region).
    """

    net: MeraNetwork
    scale: int
    region: Region
    tensor: np.ndarray
    cone_top: tuple[int, ...]
    noncone_top: tuple[int, ...]

    @property
    def d(self) -> int:
        return self.net.site_dim

    @property
    def region_dim(self) -> int:
        return self.d ** len(self.region.sites)

    @property
    def env_dim(self) -> int:
        return self.tensor.shape[-1]


def code_factor(net: MeraNetwork, scale: int, region: Region) -> CodeFactor:
    """Contract the past causal cone of ``region`` (at scale 0) down from
    the code scale, producing a :class:`CodeFactor`."""
    if region.scale != 0:
        raise RegionError("code_factor expects a physical (scale-0) region")
    d = net.site_dim
    cones = causal_cone(net, region, scale)
    cone_top = cones[scale].sites
    top_all = range(net.sites_at_scale(scale))
    noncone_top = tuple(x for x in top_all if x not in cone_top)

    w = len(cone_top)
    t = np.eye(d**w, dtype=complex).reshape([d] * w + [d] * w + [1])
    labels: list = (
        [("c", j) for j in cone_top] + [("top", j) for j in cone_top] + [("env",)]
    )

    v_t = net.isometry.reshape(d, d, d)
    u_t = net.disentangler.reshape(d, d, d, d)
    for s in range(scale, 0, -1):
        labels = [("c", lab[1]) if lab[0] == "site" else lab for lab in labels]
        kept = set(cones[s - 1].sites)
        coarse_sites = cones[s].sites
        n_fine = net.sites_at_scale(s - 1)
        for j in coarse_sites:
            ax = labels.index(("c", j))
            t = np.tensordot(v_t, t, axes=([2], [ax]))
            del labels[ax]
            labels = [("leg", 2 * j), ("leg", 2 * j + 1)] + labels
        for j in coarse_sites:
            o1, o2 = (2 * j + 1) % n_fine, (2 * j + 2) % n_fine
            if o1 not in kept and o2 not in kept:
                continue
            ax1 = labels.index(("leg", o1))
            ax2 = labels.index(("leg", o2))
            t = np.tensordot(u_t, t, axes=([2, 3], [ax1, ax2]))
            for ax in sorted((ax1, ax2), reverse=True):
                del labels[ax]
            labels = [("site", o1), ("site", o2)] + labels
        labels = [("site", lab[1]) if lab[0] == "leg" else lab for lab in labels]
        # fold legs outside the next cone into the environment
        t, labels = _fold_env(t, labels, kept)

    order = [labels.index(("site", x)) for x in region.sites]
    order += [labels.index(("top", j)) for j in cone_top]
    order += [labels.index(("env",))]
    t = t.transpose(order)
    return CodeFactor(net, scale, region, t, cone_top, noncone_top)


def _fold_env(t, labels, kept):
    env_axes = [
        ax
        for ax, lab in enumerate(labels)
        if lab[0] == "site" and lab[1] not in kept
    ]
    if not env_axes:
        return t, labels
    env_ax = labels.index(("env",))
    rest = [ax for ax in range(t.ndim) if ax not in env_axes and ax != env_ax]
    t = t.transpose(rest + env_axes + [env_ax])
    new_labels = [labels[ax] for ax in rest] + [("env",)]
    env_dim = int(np.prod([t.shape[len(rest) + i] for i in range(len(env_axes) + 1)]))
    t = t.reshape(list(t.shape[: len(rest)]) + [env_dim])
    rows = int(np.prod(t.shape[:-1]))
    if env_dim > min(rows, _ENV_COMPRESS_THRESHOLD):
        t = _compress_env(t)
    return t, new_labels


def _compress_env(t):
    """Drop numerically null environment directions (exact compression).

    The environment axis is rotated by an isometry onto the row space of
    the (rest, env) matrix, using whichever side's Gram matrix is
    smaller.  Both branches produce the same state up to a unitary on
    the environment."""
    rows = int(np.prod(t.shape[:-1]))
    m = t.reshape(rows, t.shape[-1])
    if rows <= t.shape[-1]:
        gram = m @ m.conj().T
        evals, evecs = np.linalg.eigh(gram)
        keep = evals > _ENV_COMPRESS_CUTOFF * max(evals.max(), 1.0)
        compressed = evecs[:, keep] * np.sqrt(evals[keep])
    else:
        gram = m.conj().T @ m
        evals, evecs = np.linalg.eigh(gram)
        keep = evals > _ENV_COMPRESS_CUTOFF * max(evals.max(), 1.0)
        compressed = m @ evecs[:, keep]
    return compressed.reshape(list(t.shape[:-1]) + [int(keep.sum())])


def _contract_top(factor: CodeFactor, c: np.ndarray):
    """Contract a top purification coefficient matrix ``c[t, r]`` into the
    factor.

    Returns an array with axes ``region sites..., r, paired`` where
    ``paired`` collects the environment and the non-cone top legs; two
    such arrays contracted over ``paired`` give cross reduced operators
    on region (x) reference.
    """
    net, s = factor.net, factor.scale
    d = net.site_dim
    n_top = net.sites_at_scale(s)
    dim_r = c.shape[1]
    axes_order = list(factor.cone_top) + list(factor.noncone_top) + [n_top]
    ct = c.reshape([d] * n_top + [dim_r]).transpose(axes_order)
    w = len(factor.cone_top)
    ct = ct.reshape(d**w, d ** len(factor.noncone_top) * dim_r)
    f = factor.tensor.reshape(factor.region_dim, d**w, factor.env_dim)
    out = np.einsum("ate,tq->aqe", f, ct, optimize=True)
    # axes: region, (noncone x r), env -> split r back out
    out = out.reshape(
        factor.region_dim, d ** len(factor.noncone_top), dim_r, factor.env_dim
    )
    out = out.transpose(0, 2, 1, 3).reshape(
        factor.region_dim, dim_r, d ** len(factor.noncone_top) * factor.env_dim
    )
    return out


def codeword_rdm(factor: CodeFactor, c: np.ndarray, keep_reference: bool = True):
    """Exact reduced density matrix of the purified code state on
    region (x) reference (or region alone)."""
    t = _contract_top(factor, c)
    a, r, e = t.shape
    if keep_reference:
        m = t.reshape(a * r, e)
        return m @ m.conj().T
    m = t.transpose(0, 2, 1).reshape(a, e * r)
    return m @ m.conj().T


def codeword_purification(factor: CodeFactor, c: np.ndarray):
    """Compressed purification vector on region (x) reference (x) paired
    environment; axes ``(region_dim, dim_r, paired_dim)``."""
    return _contract_top(factor, c)
