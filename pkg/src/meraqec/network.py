"""Scale-invariant binary MERA networks, causal cones and coarse-graining.

Layer geometry (one layer, coarse scale ``s+1`` with ``n`` sites to fine
scale ``s`` with ``2n`` sites, periodic):

* the isometry ``V`` maps coarse site ``j`` to the ordered leg pair
  ``(2j, 2j+1)``;
* the disentangler ``U`` acts on the ordered leg pair
  ``(2j+1, (2j+2) mod 2n)``, i.e. it straddles the outputs of neighbouring
  isometries.

Every fine site is therefore the output of exactly one disentangler, and
the parents of fine site ``f`` at the coarse scale are
``{(ceil(f/2) - 1) mod n, ceil(f/2) mod n}``.

The Heisenberg coarse-graining direction is ``Phi(O) = W^dag O W`` with
``W`` the layer isometry from coarse to fine; it is unital and completely
positive, and its adjoint is the CPTP Schroedinger map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .tensors import apply_operator_to_axes, dagger

CONSTRUCTION_TOL = 1e-8


class ConstructionError(ValueError):
    """Raised when the network tensors fail their isometry invariants."""


class RegionError(ValueError):
    """Raised for regions outside the chain at their scale."""


@dataclass(frozen=True)
class Region:
    """A set of site indices at a fixed scale of the network (periodic)."""

    scale: int
    sites: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(sorted(set(self.sites))))

    def __len__(self):
        return len(self.sites)

    def is_simply_connected(self, n_sites: int) -> bool:
        """True if the sites form a single interval on the periodic chain."""
        k = len(self.sites)
        if k == 0:
            return False
        if k == n_sites:
            return True
        present = set(self.sites)
        # A periodic interval has exactly one "gap start".
        starts = sum(
            1 for x in self.sites if (x - 1) % n_sites not in present
        )
        return starts == 1


@dataclass(frozen=True)
class MeraNetwork:
    """Scale-invariant binary MERA: one (U, V) pair shared by all layers.

    ``num_layers`` layers sit between the physical chain at scale 0 with
    ``base_sites * 2**num_layers`` sites and the top chain at scale
    ``num_layers`` with ``base_sites`` sites.
    """

    site_dim: int
    disentangler: np.ndarray  # (d^2, d^2) unitary
    isometry: np.ndarray  # (d^2, d) isometry, coarse -> (left, right)
    num_layers: int
    base_sites: int = 1
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def n_phys(self) -> int:
        return self.base_sites * 2**self.num_layers

    def sites_at_scale(self, s: int) -> int:
        if not 0 <= s <= self.num_layers:
            raise RegionError(f"scale {s} outside [0, {self.num_layers}]")
        return self.base_sites * 2 ** (self.num_layers - s)

    def top_dim(self, s: int) -> int:
        return self.site_dim ** self.sites_at_scale(s)


def build_mera(
    site_dim: int,
    disentangler: np.ndarray,
    isometry: np.ndarray,
    num_layers: int,
    base_sites: int = 1,
    provenance: dict | None = None,
) -> MeraNetwork:
    """Validate the (U, V) pair and assemble the network."""
    d = site_dim
    u = np.asarray(disentangler, dtype=complex)
    v = np.asarray(isometry, dtype=complex)
    if u.shape != (d * d, d * d):
        raise ConstructionError(f"disentangler must be {d*d} x {d*d}, got {u.shape}")
    if v.shape != (d * d, d):
        raise ConstructionError(f"isometry must be {d*d} x {d}, got {v.shape}")
    if num_layers < 1 or base_sites < 1:
        raise ConstructionError("num_layers and base_sites must be >= 1")
    eye = np.eye(d * d)
    if np.abs(dagger(u) @ u - eye).max() > CONSTRUCTION_TOL:
        raise ConstructionError("disentangler is not unitary")
    if np.abs(dagger(v) @ v - np.eye(d)).max() > CONSTRUCTION_TOL:
        raise ConstructionError("isometry fails V^dag V = I")
    return MeraNetwork(d, u, v, num_layers, base_sites, provenance or {})


def random_mera(
    site_dim: int, num_layers: int, base_sites: int = 1, seed: int = 0
) -> MeraNetwork:
    """Network with Haar-random disentangler and isometry from one seed."""
    from .tensors import rng_from_seed

    d = site_dim
    rng = rng_from_seed(seed)

    def _haar(out_dim, in_dim):
        g = rng.standard_normal((out_dim, in_dim)) + 1j * rng.standard_normal(
            (out_dim, in_dim)
        )
        q, r = np.linalg.qr(g)
        ph = np.diagonal(r).copy()
        ph /= np.abs(ph)
        return q * ph[np.newaxis, :]

    u = _haar(d * d, d * d)
    v = _haar(d * d, d)
    return build_mera(
        site_dim, u, v, num_layers, base_sites, provenance={"seed": int(seed)}
    )


def trivial_mera(num_layers: int, base_sites: int = 1) -> MeraNetwork:
    """U = identity, V = pass-through (coarse site to left leg, right leg
    fresh |0>).  Logical information sits on site 0 of every scale; the
    code state is a product state off that site, so decoupling defects
    vanish for regions avoiding it."""
    d = 2
    v = np.zeros((d * d, d), dtype=complex)
    v[0, 0] = 1.0  # |0> -> |00>
    v[2, 1] = 1.0  # |1> -> |10>
    return build_mera(d, np.eye(d * d, dtype=complex), v, num_layers, base_sites)


def parents_of(f: int, n_coarse: int) -> tuple[int, int]:
    """Coarse parents of fine site ``f`` (fine chain has ``2 n_coarse``)."""
    j = -(-f // 2)  # ceil(f / 2)
    return ((j - 1) % n_coarse, j % n_coarse)


def cone_step(net: MeraNetwork, region: Region) -> Region:
    """One coarse-graining step of the past causal cone."""
    s = region.scale
    if s >= net.num_layers:
        raise RegionError("cannot coarse-grain above the top scale")
    n_coarse = net.sites_at_scale(s + 1)
    n_fine = net.sites_at_scale(s)
    for x in region.sites:
        if not 0 <= x < n_fine:
            raise RegionError(f"site {x} outside chain of {n_fine} at scale {s}")
    out = set()
    for f in region.sites:
        out.update(parents_of(f, n_coarse))
    return Region(s + 1, tuple(sorted(out)))


def causal_cone(net: MeraNetwork, region: Region, s_to: int) -> list[Region]:
    """Past causal cone of ``region`` from its scale up to ``s_to``,
    one Region per scale (inclusive)."""
    if not region.scale <= s_to <= net.num_layers:
        raise RegionError(f"target scale {s_to} outside [{region.scale}, {net.num_layers}]")
    n = net.sites_at_scale(region.scale)
    if not region.sites or any(not 0 <= x < n for x in region.sites):
        raise RegionError(f"region {region.sites} invalid at scale {region.scale}")
    cones = [region]
    while cones[-1].scale < s_to:
        cones.append(cone_step(net, cones[-1]))
    return cones


def layer_cone_isometry(net: MeraNetwork, kept_fine: Region):
    """Isometry of one layer restricted to the past causal cone of
    ``kept_fine``.

    Returns ``(c, coarse_sites, produced)`` where ``c`` is a dense matrix
    from the Hilbert space of ``coarse_sites`` (the cone one scale up) to
    the Hilbert space of the ``produced`` fine legs, which are a superset
    of ``kept_fine``.  Legs in ``produced`` but not in ``kept_fine`` are
    the traced/environment legs of the descending superoperator.
    """
    d = net.site_dim
    s = kept_fine.scale
    coarse = cone_step(net, kept_fine)
    n_coarse = net.sites_at_scale(s + 1)
    n_fine = net.sites_at_scale(s)
    kept = set(kept_fine.sites)

    # Work on a labelled tensor; start from the identity on the coarse cone.
    w = len(coarse.sites)
    t = np.eye(d**w, dtype=complex).reshape([d] * w + [d**w])
    labels: list = [("c", j) for j in coarse.sites] + [("in",)]

    v_t = net.isometry.reshape(d, d, d)  # (left, right, coarse)
    for j in coarse.sites:
        ax = labels.index(("c", j))
        t = np.tensordot(v_t, t, axes=([2], [ax]))
        del labels[ax]
        labels = [("leg", 2 * j), ("leg", (2 * j + 1) % n_fine)] + labels

    u_t = net.disentangler.reshape(d, d, d, d)  # (out_l, out_r, in_l, in_r)
    applied_outputs = set()
    for j in sorted(coarse.sites):
        o1, o2 = (2 * j + 1) % n_fine, (2 * j + 2) % n_fine
        if o1 not in kept and o2 not in kept:
            continue
        ax1 = labels.index(("leg", o1))
        ax2 = labels.index(("leg", o2))
        t = np.tensordot(u_t, t, axes=([2, 3], [ax1, ax2]))
        for ax in sorted((ax1, ax2), reverse=True):
            del labels[ax]
        labels = [("site", o1), ("site", o2)] + labels
        applied_outputs.update((o1, o2))

    for k, lab in enumerate(labels):
        if lab[0] == "leg":
            labels[k] = ("site", lab[1])

    produced = sorted(lab[1] for lab in labels if lab[0] == "site")
    if not kept <= set(produced):
        raise RegionError("cone layer lost a kept leg (internal error)")
    order = [labels.index(("site", f)) for f in produced] + [labels.index(("in",))]
    t = t.transpose(order)
    c = t.reshape(d ** len(produced), d**w)
    return c, coarse, produced


def ascend_operator(net: MeraNetwork, op: np.ndarray, region: Region, s_to: int,
                    extra_dim: int = 1):
    """Heisenberg coarse-graining of ``op`` from ``region.scale`` to ``s_to``.

    ``op`` is a matrix on the sites of ``region`` (sorted order) tensored
    with an optional trailing passive factor of dimension ``extra_dim``
    (e.g. a purifying-space leg that the channel does not touch).  Returns
    ``(op_out, region_out)`` with ``op_out`` supported on the causal cone
    of ``region`` at scale ``s_to``.

    The map is unital and norm-nonincreasing; tensors outside the past
    causal cone cancel by isometry and are never contracted.
    """
    d = net.site_dim
    dim = d ** len(region.sites) * extra_dim
    if op.shape != (dim, dim):
        raise RegionError(
            f"operator shape {op.shape} does not match region ({dim})"
        )
    cur_op, cur_region = np.asarray(op, dtype=complex), region
    while cur_region.scale < s_to:
        c, coarse, produced = layer_cone_isometry(net, cur_region)
        cur_op, cur_region = _ascend_one_layer(
            net, cur_op, cur_region, c, coarse, produced, extra_dim
        )
    return cur_op, cur_region


def _ascend_one_layer(net, op, region, c, coarse, produced, extra_dim):
    d = net.site_dim
    k = len(region.sites)
    np_legs = len(produced)
    pos = [produced.index(x) for x in region.sites]
    dp = d**np_legs
    w_in = c.shape[1]
    # (O (x) I_extras) acting on c (x) I_extra: work with legs explicit.
    c_t = c.reshape([d] * np_legs + [w_in])
    op_t = op.reshape([d] * k + [extra_dim] + [d] * k + [extra_dim])
    # Contract op's column site-legs with c's kept legs.
    oc = np.tensordot(op_t, c_t, axes=(list(range(k + 1, 2 * k + 1)), pos))
    # oc axes: row site-legs (k), row extra, col extra, remaining c legs, w_in
    rest = [ax for ax in range(np_legs) if ax not in pos]
    # Move to: produced legs (rows: kept rows at pos, untouched legs), extra_row,
    # w_in, extra_col  -> matrix ((dp * e) x (w_in * e))
    n_oc = oc.ndim
    # oc axis map
    row_site_ax = {region.sites[i]: i for i in range(k)}
    extra_row_ax = k
    extra_col_ax = k + 1
    rest_ax = {produced[rest[i]]: k + 2 + i for i in range(len(rest))}
    win_ax = n_oc - 1
    perm = []
    for i, f in enumerate(produced):
        perm.append(row_site_ax[f] if f in row_site_ax else rest_ax[f])
    perm += [extra_row_ax, win_ax, extra_col_ax]
    oc = oc.transpose(perm).reshape(dp * extra_dim, w_in * extra_dim)
    # Now Phi(O) = c^dag (O (x) I) c with extras passive:
    cdag = c.conj().T  # (w_in, dp)
    # oc currently maps (w_in, extra_col) -> (dp, extra_row); contract dp legs.
    oc = oc.reshape(dp, extra_dim, w_in, extra_dim)
    out = np.tensordot(cdag, oc, axes=([1], [0]))  # (w_in_row, e_row, w_in_col, e_col)
    out = out.transpose(0, 1, 2, 3).reshape(w_in * extra_dim, w_in * extra_dim)
    return out, coarse


def encode_state(net: MeraNetwork, phi: np.ndarray, scale: int | None = None) -> np.ndarray:
    """Apply the encoding isometry W_1 ... W_s to a state on the scale-``s``
    chain, returning the physical state.  Dense; guarded to desk scale."""
    d = net.site_dim
    s = net.num_layers if scale is None else scale
    n_top = net.sites_at_scale(s)
    if phi.shape != (d**n_top,):
        raise RegionError(f"state dim {phi.shape} != {d**n_top} at scale {s}")
    if d ** net.n_phys > 2**20:
        raise RegionError("dense encoding beyond 2**20 amplitudes; use the "
                          "reduced-state engine instead")
    vec = np.asarray(phi, dtype=complex).reshape([d] * n_top)
    v_t = net.isometry.reshape(d, d, d)
    u_t = net.disentangler.reshape(d, d, d, d)
    for cur in range(s, 0, -1):
        n_coarse = net.sites_at_scale(cur)
        n_fine = 2 * n_coarse
        # isometries: coarse axis j -> legs (2j, 2j+1)
        out = vec
        for j in range(n_coarse - 1, -1, -1):
            out = np.tensordot(v_t, out, axes=([2], [j]))
            # new legs are prepended; move them behind the unprocessed
            # coarse axes so site order stays canonical
            nd = out.ndim
            perm = list(range(2, 2 + j)) + [0, 1] + list(range(2 + j, nd))
            out = out.transpose(perm)
        # disentanglers on (2j+1, 2j+2 mod n_fine)
        for j in range(n_coarse):
            a, b = (2 * j + 1) % n_fine, (2 * j + 2) % n_fine
            out = apply_operator_to_axes(net.disentangler, out, [a, b], d)
        vec = out
    return vec.reshape(-1)


def encoding_isometry(net: MeraNetwork, scale: int | None = None) -> np.ndarray:
    """Dense matrix of the encoder W_1 ... W_s (columns are encoded basis
    states).  Desk scale only."""
    d = net.site_dim
    s = net.num_layers if scale is None else scale
    dim_top = net.top_dim(s)
    cols = [encode_state(net, _basis(dim_top, i), s) for i in range(dim_top)]
    return np.stack(cols, axis=1)


def _basis(dim, i):
    e = np.zeros(dim, dtype=complex)
    e[i] = 1.0
    return e


@dataclass(frozen=True)
class PurifiedCodeState:
    """Purification of a code density operator: amplitudes on H_0 (x) H_R."""

    scale: int
    top_state: np.ndarray  # rho_s^(1/2)
    reference_unitary: np.ndarray
    amplitudes: np.ndarray  # (d^N, dim_R)


class StateError(ValueError):
    pass


def purify_code_state(
    net: MeraNetwork, rho_s: np.ndarray, reference_unitary: np.ndarray | None = None,
    scale: int | None = None,
) -> PurifiedCodeState:
    """Purified code state (W_1...W_s (x) U_R)(rho_s^(1/2) (x) I)|Omega>.

    ``rho_s`` must be PSD with unit trace; the reference copy carries the
    transpose structure of the maximally entangled pairing.
    """
    s = net.num_layers if scale is None else scale
    dim = net.top_dim(s)
    rho_s = np.asarray(rho_s, dtype=complex)
    if rho_s.shape != (dim, dim):
        raise StateError(f"rho_s must be {dim} x {dim}")
    if np.abs(rho_s - dagger(rho_s)).max() > 1e-8:
        raise StateError("rho_s is not Hermitian")
    evals, evecs = np.linalg.eigh(rho_s)
    if evals.min() < -1e-10:
        raise StateError(f"rho_s is not PSD (min eigenvalue {evals.min():.2e})")
    if abs(evals.sum() - 1.0) > 1e-8:
        raise StateError("rho_s must have unit trace")
    u_r = np.eye(dim, dtype=complex) if reference_unitary is None else np.asarray(
        reference_unitary, dtype=complex
    )
    sqrt_rho = (evecs * np.sqrt(np.clip(evals, 0, None))) @ dagger(evecs)
    c = top_purification(sqrt_rho, u_r)
    enc = encoding_isometry(net, s)
    amps = enc @ c  # (d^N, dim_R)
    return PurifiedCodeState(s, sqrt_rho, u_r, amps)


def top_purification(sqrt_rho: np.ndarray, u_r: np.ndarray | None = None) -> np.ndarray:
    """Coefficient matrix c[t, r] of (rho^(1/2) (x) U_R)|Omega>, normalized.

    ``|Omega>`` is the maximally entangled state sum_t |t>|t> / sqrt(dim).
    """
    dim = sqrt_rho.shape[0]
    c = sqrt_rho if u_r is None else sqrt_rho @ u_r.T
    # (rho^(1/2) (x) U_R) sum_t |t>|t>: c[t, r] = sum_t' sqrt_rho[t, t'] U_R[r, t']
    c = c / np.linalg.norm(c)
    return c


# ---------------------------------------------------------------------------
# serialization

SERIAL_VERSION = 1


def _complex_pairs(m: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in m.reshape(-1)]


def _from_pairs(pairs, shape) -> np.ndarray:
    arr = np.array([complex(re, im) for re, im in pairs], dtype=complex)
    return arr.reshape(shape)


def network_to_json(net: MeraNetwork) -> str:
    d = net.site_dim
    doc = {
        "version": SERIAL_VERSION,
        "site_dim": d,
        "base_sites": net.base_sites,
        "num_layers": net.num_layers,
        "U": _complex_pairs(net.disentangler),
        "V": _complex_pairs(net.isometry),
        "seed_provenance": net.provenance,
    }
    return json.dumps(doc, sort_keys=True)


def network_from_json(text: str) -> MeraNetwork:
    doc = json.loads(text)
    if doc.get("version") != SERIAL_VERSION:
        raise ConstructionError(f"unsupported network document version {doc.get('version')}")
    d = doc["site_dim"]
    u = _from_pairs(doc["U"], (d * d, d * d))
    v = _from_pairs(doc["V"], (d * d, d))
    return build_mera(d, u, v, doc["num_layers"], doc["base_sites"],
                      provenance=doc.get("seed_provenance", {}))
