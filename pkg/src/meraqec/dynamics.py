"""Local-Hamiltonian dynamics and the emergent-lightcone bound.

Operators deep in the renormalization hierarchy spread slowly: conjugating
a scale-s operator down to the physical chain and evolving under a local
Hamiltonian, the commutator with any local operator obeys

    |<rho_0| [O_1(t), O_2] |sigma_0>|  <=  c' (v|t| + xi nu s)^nu 2^(-nu s),

with nu the transfer-operator scaling dimension and (v, xi) measured
Lieb-Robinson parameters.  Evolution is exact (dense eigendecomposition),
so truncation errors and commutators carry no integrator error.

The truncation-error model is c ||O|| exp(-(l - v|t|)/xi), decaying in the
truncation radius l; (v, xi, c) come from a linear least-squares fit of
log||O(t) - O^l(t)|| against (l, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import MeraNetwork, encode_state, encoding_isometry
from .qec import BoundReport, CodeSpec, block_dim
from .tensors import embed_operator

HERMITIAN_TOL = 1e-10
MAX_DENSE_DIM = 2**14


class DynamicsError(ValueError):
    pass


@dataclass(frozen=True)
class LocalHamiltonian:
    """Sum of one- and two-site Hermitian terms on a chain."""

    n_sites: int
    site_dim: int
    terms: tuple[tuple[tuple[int, ...], np.ndarray], ...]

    def __post_init__(self):
        for sites, mat in self.terms:
            if not 1 <= len(sites) <= 2:
                raise DynamicsError(f"term support {sites} must be 1 or 2 sites")
            if any(not 0 <= x < self.n_sites for x in sites):
                raise DynamicsError(f"term support {sites} outside chain")
            dim = self.site_dim ** len(sites)
            if mat.shape != (dim, dim):
                raise DynamicsError(f"term on {sites} has shape {mat.shape}")
            if np.abs(mat - mat.conj().T).max() > HERMITIAN_TOL:
                raise DynamicsError(f"term on {sites} is not Hermitian")

    @property
    def coupling_norm(self) -> float:
        """Max operator norm over terms."""
        return max(
            float(np.linalg.norm(mat, ord=2)) for _, mat in self.terms
        )

    def dense(self, support: set[int] | None = None) -> np.ndarray:
        """Full-chain matrix, optionally keeping only terms whose support
        lies inside ``support``."""
        dim = self.site_dim**self.n_sites
        if dim > MAX_DENSE_DIM:
            raise DynamicsError(
                f"dense Hamiltonian dimension {dim} exceeds {MAX_DENSE_DIM}; "
                "use the truncated path"
            )
        h = np.zeros((dim, dim), dtype=complex)
        d = self.site_dim
        for sites, mat in self.terms:
            if support is not None and not set(sites) <= support:
                continue
            order = sorted(range(len(sites)), key=lambda i: sites[i])
            if order != list(range(len(sites))):
                k = len(sites)
                perm = list(order) + [k + i for i in order]
                mat = mat.reshape([d] * (2 * k)).transpose(perm).reshape(
                    d**k, d**k
                )
                sites = tuple(sorted(sites))
            h += embed_operator(mat, list(sites), self.n_sites, self.site_dim)
        return h


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(kind: str) -> np.ndarray:
    return _PAULI[kind].copy()


def heisenberg_chain(
    n_sites: int, coupling: float = 1.0, periodic: bool = True
) -> LocalHamiltonian:
    """Nearest-neighbor Heisenberg chain: J (XX + YY + ZZ) on each bond."""
    bond = coupling * sum(
        np.kron(_PAULI[k], _PAULI[k]) for k in ("x", "y", "z")
    )
    n_bonds = n_sites if periodic else n_sites - 1
    terms = tuple(
        ((j, (j + 1) % n_sites), bond) for j in range(n_bonds)
    )
    return LocalHamiltonian(n_sites, 2, terms)


def evolve_operator(H: LocalHamiltonian, op: np.ndarray, t: float) -> np.ndarray:
    """Exact Heisenberg evolution e^{iHt} O e^{-iHt}."""
    dim = H.site_dim**H.n_sites
    if op.shape != (dim, dim):
        raise DynamicsError(f"operator shape {op.shape}, expected {(dim, dim)}")
    evals, evecs = np.linalg.eigh(H.dense())
    phases = np.exp(1j * evals * t)
    u = (evecs * phases) @ evecs.conj().T
    return u @ op @ u.conj().T


def truncated_evolution(
    H: LocalHamiltonian,
    op: np.ndarray,
    t: float,
    radius: int,
    support: tuple[int, ...],
) -> np.ndarray:
    """Evolution under H restricted to terms within circular distance
    ``radius`` of ``support``."""
    if radius < 0:
        raise DynamicsError("radius must be non-negative")
    n = H.n_sites
    keep = set()
    for x in range(n):
        if min(_circ_dist(x, a, n) for a in support) <= radius:
            keep.add(x)
    evals, evecs = np.linalg.eigh(H.dense(support=keep))
    phases = np.exp(1j * evals * t)
    u = (evecs * phases) @ evecs.conj().T
    return u @ op @ u.conj().T


def _circ_dist(x: int, y: int, n: int) -> int:
    return min((x - y) % n, (y - x) % n)


@dataclass(frozen=True)
class LRParameters:
    """Measured operator-spreading parameters: truncation error is
    modelled as c ||O|| exp(-(l - v|t|)/xi)."""

    v: float
    xi: float
    c: float

    def __post_init__(self):
        if self.v <= 0 or self.xi <= 0 or self.c <= 0:
            raise DynamicsError(
                f"spreading parameters must be positive: {self}"
            )


def fit_spreading_parameters(
    H: LocalHamiltonian,
    op: np.ndarray,
    support: tuple[int, ...],
    t_grid=(0.25, 0.5, 0.75, 1.0),
    l_grid=(1, 2, 3),
    floor: float = 1e-13,
) -> LRParameters:
    """Least-squares fit of log||O(t) - O^l(t)|| = log c - l/xi + v t / xi
    over the (t, l) grid."""
    rows, vals = [], []
    for t in t_grid:
        exact = evolve_operator(H, op, t)
        for radius in l_grid:
            trunc = truncated_evolution(H, op, t, radius, support)
            err = float(np.linalg.norm(exact - trunc, ord=2))
            if err < floor:
                continue
            rows.append([1.0, float(radius), float(t)])
            vals.append(math.log(err))
    if len(rows) < 3:
        raise DynamicsError("not enough non-trivial truncation errors to fit")
    coef, *_ = np.linalg.lstsq(np.array(rows), np.array(vals), rcond=None)
    logc, neg_inv_xi, v_over_xi = coef
    if neg_inv_xi >= 0 or v_over_xi <= 0:
        raise DynamicsError(
            f"fit produced non-decaying truncation model (coef {coef})"
        )
    xi = -1.0 / neg_inv_xi
    return LRParameters(v=v_over_xi * xi, xi=xi, c=math.exp(logc))


# ---------------------------------------------------------------------------
# Logical operators and the lightcone bound


def logical_operator(code: CodeSpec, op_s: np.ndarray) -> np.ndarray:
    """Conjugate a scale-s operator into the physical chain through the
    encoding layers.  The image of the identity is the code-subspace
    projector; off-code components are annihilated."""
    iso = encoding_isometry(code.net, code.scale)
    d_top = code.top_dim
    if op_s.shape != (d_top, d_top):
        raise DynamicsError(f"operator shape {op_s.shape}, expected {(d_top, d_top)}")
    return iso @ op_s @ iso.conj().T


def _purified_vector(code: CodeSpec, c: np.ndarray) -> np.ndarray:
    """Dense purified code state as a (phys_dim, ref_dim) matrix."""
    d_top = code.top_dim
    dim_r = c.shape[1]
    out = np.zeros((code.net.site_dim**code.net.n_phys, dim_r), dtype=complex)
    for t in range(d_top):
        basis = np.zeros(d_top, dtype=complex)
        basis[t] = 1.0
        out += np.outer(encode_state(code.net, basis, code.scale), c[t])
    return out


def lightcone_commutator(
    code: CodeSpec,
    op1: np.ndarray,
    op2_s: np.ndarray,
    t: float,
    H: LocalHamiltonian,
    c_rho: np.ndarray,
    c_sigma: np.ndarray,
) -> float:
    """|<rho_0| [O_1(t), logical(O_2)] |sigma_0>| for purified code states
    with top coefficient matrices c_rho, c_sigma."""
    o1t = evolve_operator(H, op1, t)
    o2 = logical_operator(code, op2_s)
    comm = o1t @ o2 - o2 @ o1t
    vr = _purified_vector(code, c_rho)
    vs = _purified_vector(code, c_sigma)
    if vr.shape[1] != vs.shape[1]:
        raise DynamicsError("purifications have different reference dimensions")
    return float(abs(np.einsum("pr,pq,qr->", vr.conj(), comm, vs)))


def delta_cancellation_residual(
    code: CodeSpec,
    op2_s: np.ndarray,
    c_rho: np.ndarray,
    c_sigma: np.ndarray,
) -> float:
    """Residual of the identity <rho_s|O_2_s|sigma_s> = <rho_0|O_2|sigma_0>
    evaluated both ways through the encoding (exact by isometry)."""
    top = complex(
        np.einsum("tr,tu,ur->", c_rho.conj(), op2_s, c_sigma)
    )
    top_adj = complex(
        np.einsum("tr,ut,ur->", c_rho.conj(), op2_s.conj(), c_sigma)
    )
    o2 = logical_operator(code, op2_s)
    vr = _purified_vector(code, c_rho)
    vs = _purified_vector(code, c_sigma)
    phys = complex(np.einsum("pr,pq,qr->", vr.conj(), o2, vs))
    return max(abs(top - phys), abs(top_adj - phys))


def eigenstate_commutator_symmetry(
    H: LocalHamiltonian,
    op1: np.ndarray,
    op2: np.ndarray,
    t: float,
    which: int = 0,
) -> tuple[complex, complex]:
    """Both sides of <psi|[O_1(t), O_2]|psi> = <psi|[O_1, O_2(t)]|psi> for
    the ``which``-th eigenstate of H.

    The identity holds for a Hamiltonian with a real eigenbasis when O_1
    is real-symmetric and O_2 has purely imaginary antisymmetric matrix
    elements (e.g. X-type and Y-type observables).
    """
    evals, evecs = np.linalg.eigh(H.dense())
    psi = evecs[:, which]
    o1t = evolve_operator(H, op1, t)
    o2t = evolve_operator(H, op2, t)
    lhs = psi.conj() @ (o1t @ op2 - op2 @ o1t) @ psi
    rhs = psi.conj() @ (op1 @ o2t - o2t @ op1) @ psi
    return complex(lhs), complex(rhs)


def lightcone_prefactor(code: CodeSpec, lr: LRParameters) -> float:
    """c' = 2 d^2 e^nu max(1, c): the recorded constant in the lightcone
    bound, from the truncation-radius choice l/xi = nu s + v|t|/xi."""
    nu = code.nu()
    return 2.0 * block_dim(code.net) ** 2 * math.exp(nu) * max(1.0, lr.c)


def lightcone_sweep(
    code: CodeSpec,
    H: LocalHamiltonian,
    op1: np.ndarray,
    op1_support: tuple[int, ...],
    op2_s: np.ndarray,
    t_grid,
    c_rho: np.ndarray | None = None,
    c_sigma: np.ndarray | None = None,
) -> list[dict]:
    """Rows {t, lhs, rhs, nu, v, xi, c_prime, satisfied} comparing the
    measured commutator to c' (v|t| + xi nu s)^nu 2^(-nu s)."""
    nu = code.nu()
    s = code.scale
    lr = fit_spreading_parameters(H, op1, op1_support)
    c_prime = lightcone_prefactor(code, lr)
    d_top = code.top_dim
    if c_rho is None:
        c_rho = np.eye(d_top, dtype=complex) / math.sqrt(d_top)
    if c_sigma is None:
        c_sigma = np.eye(d_top, dtype=complex) / math.sqrt(d_top)
    norm2 = float(np.linalg.norm(op2_s, ord=2))
    op2_s = op2_s / norm2 if norm2 > 0 else op2_s
    rows = []
    for t in t_grid:
        lhs = lightcone_commutator(code, op1, op2_s, t, H, c_rho, c_sigma)
        rhs = c_prime * (lr.v * abs(t) + lr.xi * nu * s) ** nu * 2.0 ** (-nu * s)
        rows.append(
            {
                "t": float(t),
                "lhs": lhs,
                "rhs": rhs,
                "nu": nu,
                "v": lr.v,
                "xi": lr.xi,
                "c_prime": c_prime,
                "satisfied": lhs <= rhs + 1e-8,
            }
        )
    return rows


def verify_lightcone_bound(
    code: CodeSpec,
    H: LocalHamiltonian,
    op1: np.ndarray,
    op1_support: tuple[int, ...],
    op2_s: np.ndarray,
    t_grid,
) -> BoundReport:
    """Worst point of the t sweep as a bound report."""
    rows = lightcone_sweep(code, H, op1, op1_support, op2_s, t_grid)
    worst = max(rows, key=lambda r: r["lhs"] - r["rhs"])
    return BoundReport.create(
        claim="commutator <= c' (v|t| + xi nu s)^nu 2^(-nu s)",
        lhs=worst["lhs"],
        rhs=worst["rhs"],
        constants={
            "nu": worst["nu"],
            "v": worst["v"],
            "xi": worst["xi"],
            "c_prime": worst["c_prime"],
            "s": code.scale,
            "t_worst": worst["t"],
        },
        seeds=(code.net.provenance.get("seed"),)
        if code.net.provenance.get("seed") is not None
        else (),
    )
