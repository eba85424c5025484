"""Elementary-block transfer operator and its spectral theory.

One renormalization layer maps operators on a width-3 block of sites,
ordered left-to-right as (-1, 0, 1) around site 0, to the same block one
scale up: the block is its own causal-cone image, so the map iterates.
The Heisenberg map Phi(O) = sum_e E_e^dag O E_e is unital and completely
positive; its natural matrix acts on row-major vectorized operators, so
for a qubit block it is 64 x 64.  Spectra follow the convention

    Phi(O) = sum_k lambda_k tr[O R_k] L_k,

with L_0 normalized to the identity, R_0 the stationary state, and
tr[L_k R_l] = delta_kl.  The scaling dimension is nu = -log2(Re lambda_1)
and governs every decay exponent downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import MeraNetwork, Region, layer_cone_isometry

UNITALITY_TOL = 1e-10
CHOI_TOL = 1e-8
SPECTRAL_RADIUS_TOL = 1e-10
DEFECTIVE_COND = 1e8
_BLOCK_WIDTH = 3


class ChannelError(ValueError):
    pass


class NotMixingError(ChannelError):
    """Top eigenvalue of magnitude one is degenerate."""


class BranchError(ChannelError):
    """Re(lambda_1) <= 0: the scaling dimension has no real-log branch."""


@dataclass(frozen=True)
class Channel:
    """A completely positive map in the Heisenberg picture.

    ``natural_matrix`` (out_dim^2 x in_dim^2) acts on row-major
    vectorized operators; ``kraus`` (optional) are matrices E_e with
    Phi(O) = sum_e E_e^dag O E_e.
    """

    in_dim: int
    out_dim: int
    natural_matrix: np.ndarray
    kraus: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        m = self.natural_matrix
        if m.shape != (self.out_dim**2, self.in_dim**2):
            raise ChannelError(
                f"natural matrix shape {m.shape} does not match dims "
                f"({self.out_dim}^2, {self.in_dim}^2)"
            )
        eye_in = np.eye(self.in_dim, dtype=complex).reshape(-1)
        eye_out = np.eye(self.out_dim, dtype=complex).reshape(-1)
        if np.abs(m @ eye_in - eye_out).max() > UNITALITY_TOL:
            raise ChannelError("channel is not unital within tolerance")
        cmin = np.linalg.eigvalsh(self.choi()).min()
        if cmin < -CHOI_TOL:
            raise ChannelError(
                f"Choi operator has eigenvalue {cmin}: not completely positive"
            )

    def apply(self, op: np.ndarray) -> np.ndarray:
        """Heisenberg action Phi(O)."""
        return (self.natural_matrix @ op.reshape(-1)).reshape(
            self.out_dim, self.out_dim
        )

    def schrodinger_matrix(self) -> np.ndarray:
        """Natural matrix of the trace-preserving adjoint (state map)."""
        return self.natural_matrix.conj().T

    def apply_state(self, rho: np.ndarray) -> np.ndarray:
        return (self.schrodinger_matrix() @ rho.reshape(-1)).reshape(
            self.in_dim, self.in_dim
        )

    def choi(self) -> np.ndarray:
        """Choi operator of the state map (PSD iff completely positive)."""
        n = self.schrodinger_matrix()
        di, do = self.out_dim, self.in_dim
        j = n.reshape(do, do, di, di).transpose(2, 0, 3, 1)
        return j.reshape(di * do, di * do)


@dataclass(frozen=True)
class SpectralData:
    """Spectral decomposition of a square channel."""

    eigenvalues: np.ndarray
    left_ops: tuple[np.ndarray, ...]
    right_ops: tuple[np.ndarray, ...]
    nu: float
    defective: bool


def identity_channel(d: int) -> Channel:
    kraus = (np.eye(d, dtype=complex),)
    return Channel(d, d, np.eye(d * d, dtype=complex), kraus)


def depolarizing_channel(d: int) -> Channel:
    """Completely depolarizing channel: Phi(O) = tr[O] I / d (Heisenberg:
    Phi(O) = tr[O]/d * I)."""
    eye = np.eye(d, dtype=complex).reshape(-1)
    natural = np.outer(eye, eye) / d
    kraus = tuple(
        np.sqrt(1.0 / d) * _unit_matrix(d, i, j)
        for i in range(d)
        for j in range(d)
    )
    return Channel(d, d, natural, kraus)


def _unit_matrix(d, i, j):
    m = np.zeros((d, d), dtype=complex)
    m[i, j] = 1.0
    return m


def channel_from_kraus(kraus) -> Channel:
    kraus = tuple(np.asarray(k, dtype=complex) for k in kraus)
    out_dim, in_dim = kraus[0].shape[1], kraus[0].shape[0]
    natural = sum(np.kron(k.conj().T, k.T) for k in kraus)
    return Channel(in_dim, out_dim, natural, kraus)


def build_transfer_operator(net: MeraNetwork) -> Channel:
    """Channel mapping operators on the width-3 block around site 0 to the
    same block one scale up.

    The block geometry is fixed (sites -1, 0, 1 on a ring wide enough that
    the cone does not wrap), so the result depends only on the network's
    disentangler and isometry, not on its depth.
    """
    d = net.site_dim
    scaffold = MeraNetwork(
        site_dim=d,
        disentangler=net.disentangler,
        isometry=net.isometry,
        num_layers=1,
        base_sites=4,
        provenance=net.provenance,
    )
    n_fine = 8
    kept_sites = (n_fine - 1, 0, 1)
    c, coarse, produced = layer_cone_isometry(
        scaffold, Region(0, tuple(sorted(kept_sites)))
    )
    coarse_block = (coarse.sites[-1], 0, 1)  # left-to-right (-1, 0, 1)
    if set(coarse_block) != set(coarse.sites):
        raise ChannelError("unexpected cone geometry for the elementary block")

    n_prod = len(produced)
    extras = [x for x in produced if x not in kept_sites]
    c_t = c.reshape([d] * n_prod + [d] * len(coarse.sites))
    row_order = [produced.index(x) for x in kept_sites] + [
        produced.index(x) for x in extras
    ]
    col_order = [n_prod + list(coarse.sites).index(x) for x in coarse_block]
    c_t = c_t.transpose(row_order + col_order)
    dim = d**_BLOCK_WIDTH
    c_block = c_t.reshape(dim, d ** len(extras), dim)
    kraus = tuple(c_block[:, e, :] for e in range(d ** len(extras)))
    ch = channel_from_kraus(kraus)
    radius = np.abs(np.linalg.eigvals(ch.natural_matrix)).max()
    if radius > 1.0 + SPECTRAL_RADIUS_TOL:
        raise ChannelError(f"spectral radius {radius} exceeds one")
    return ch


def spectral_decomposition(ch: Channel) -> SpectralData:
    """Eigen-decomposition Phi(O) = sum_k lambda_k tr[O R_k] L_k.

    Right eigenvectors of the natural matrix are the vectorized L_k; the
    R_k come from the dual basis, so tr[L_k R_l] = delta_kl by
    construction.  When the eigenvector matrix is ill-conditioned
    (condition number > 1e8) only the fixed-point sector is returned and
    ``defective`` is set.
    """
    if ch.in_dim != ch.out_dim:
        raise ChannelError("spectral decomposition needs a square channel")
    d = ch.in_dim
    evals, evecs = np.linalg.eig(ch.natural_matrix)
    order = np.lexsort((-evals.imag, -evals.real))
    evals, evecs = evals[order], evecs[:, order]

    if np.linalg.cond(evecs) > DEFECTIVE_COND:
        lam0, l0, r0 = _fixed_point_sector(ch, evals, evecs)
        return SpectralData(evals, (l0,), (r0,), _nu_or_nan(evals), True)

    dual = np.linalg.inv(evecs)
    left_ops, right_ops = [], []
    for k in range(len(evals)):
        lk = evecs[:, k].reshape(d, d)
        rk = dual[k].reshape(d, d).T
        if k == 0:
            scale = np.trace(lk) / d
            if abs(scale) < 1e-12:
                raise ChannelError("fixed-point operator is traceless")
        else:
            idx = np.argmax(np.abs(lk))
            scale = lk.reshape(-1)[idx]
        lk, rk = lk / scale, rk * scale
        left_ops.append(lk)
        right_ops.append(rk)
    return SpectralData(
        evals, tuple(left_ops), tuple(right_ops), _nu_or_nan(evals), False
    )


def _fixed_point_sector(ch, evals, evecs):
    d = ch.in_dim
    k0 = int(np.argmin(np.abs(evals - 1.0)))
    l0 = evecs[:, k0].reshape(d, d)
    l0 = l0 / (np.trace(l0) / d)
    aevals, aevecs = np.linalg.eig(ch.schrodinger_matrix())
    j0 = int(np.argmin(np.abs(aevals - 1.0)))
    r0 = aevecs[:, j0].reshape(d, d)
    r0 = (r0 + r0.conj().T) / 2
    r0 = r0 / np.trace(r0)
    return evals[k0], l0, r0


def _nu_or_nan(evals) -> float:
    if len(evals) < 2:
        return float("nan")
    re1 = evals[1].real
    if re1 <= 0 or abs(evals[1]) > 1 - 1e-8:
        return float("nan")
    return float(-np.log2(re1))


def scaling_dimension(sd: SpectralData) -> float:
    """nu = -log2(Re lambda_1); requires a unique magnitude-1 eigenvalue
    and Re lambda_1 > 0."""
    evals = sd.eigenvalues
    if abs(evals[0] - 1.0) > 1e-8:
        raise NotMixingError(f"top eigenvalue {evals[0]} is not 1")
    if len(evals) > 1 and abs(evals[1]) > 1 - 1e-8:
        raise NotMixingError("magnitude-1 eigenvalue is degenerate")
    re1 = evals[1].real
    if re1 <= 0:
        raise BranchError(
            f"Re(lambda_1) = {re1} <= 0: scaling dimension undefined"
        )
    return float(-np.log2(re1))


def check_rg_regular(sd: SpectralData, tol: float = 1e-8) -> dict:
    """Report whether the channel is renormalization-regular: a unique
    magnitude-1 eigenvalue and a positive scaling dimension."""
    evals = sd.eigenvalues
    reasons = []
    lam1_mag = float(np.abs(evals[1])) if len(evals) > 1 else 0.0
    if abs(abs(evals[0]) - 1.0) > tol:
        reasons.append(f"|lambda_0| = {abs(evals[0])} differs from 1")
    if lam1_mag > 1 - tol:
        reasons.append("second eigenvalue has magnitude 1: fixed space degenerate")
    nu = None
    try:
        nu = scaling_dimension(sd)
        if nu <= tol:
            reasons.append(f"scaling dimension {nu} not positive")
    except ChannelError as exc:
        reasons.append(str(exc))
    return {
        "is_regular": not reasons,
        "gap": 1.0 - lam1_mag,
        "lambda_1_magnitude": lam1_mag,
        "nu": nu,
        "reasons": reasons,
    }


def spectrum_report(sd: SpectralData, tol: float = 1e-8) -> dict:
    """JSON-ready spectrum summary."""
    reg = check_rg_regular(sd, tol)
    return {
        "eigenvalues": [[float(v.real), float(v.imag)] for v in sd.eigenvalues],
        "nu": None if np.isnan(sd.nu) else float(sd.nu),
        "gap": reg["gap"],
        "is_regular": reg["is_regular"],
        "defective": sd.defective,
    }


def spectrum_csv(sd: SpectralData) -> str:
    lines = ["index,real,imag,magnitude"]
    for k, v in enumerate(sd.eigenvalues):
        lines.append(f"{k},{v.real:.16e},{v.imag:.16e},{abs(v):.16e}")
    return "\n".join(lines) + "\n"
