"""Approximate-code analysis of encoded states: decoupling defects,
state distances, Petz recovery, correctability bounds, and the
code-distance exponent.

Regions far larger than dense linear algebra allows are handled through a
frame representation: every vector the recovery analysis touches is a
linear combination of the causal-cone factor columns F[:, t, e], so after
one large Gram-matrix product (the frame Gram T0) all Petz and
trace-distance computations reduce to small dense algebra.  Trace norms
of low-rank differences come from the signed Gram spectrum, which equals
the spectrum of the difference itself.

Conventions fixed here:
  - Bures distance B(rho, sigma) = sqrt(1 - F) with fidelity
    F = tr sqrt(sqrt(rho) sigma sqrt(rho)), so orthogonal pure states are
    at distance 1 and 2 B^2 <= ||rho - sigma||_1 <= 2 sqrt(2) B.
  - Petz reference state: the marginal of the maximally-entangled-input
    codeword; pseudo-inverses cut off below 1e-10.
  - Recovery error: max over the maximally-entangled codeword plus a
    seeded sample of random pure codewords, of the trace distance between
    the recovered and true purified states (nothing is traced out: the
    discarded sites enter through an isometrically equivalent
    environment index, so the distance equals the full-system value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import MeraNetwork, Region, RegionError
from .reduced import code_factor, codeword_purification, codeword_rdm
from .tensors import rng_from_seed

PSEUDO_INV_CUTOFF = 1e-10
STATE_TOL = 1e-8
BOUND_TOL = 1e-8
DENSE_DIM = 4096
DEFAULT_OPERATOR_SAMPLES = 64
DEFAULT_CODEWORD_SAMPLES = 32


class QecError(ValueError):
    pass


def block_dim(net: MeraNetwork) -> int:
    """Hilbert dimension of the width-3 elementary block."""
    return net.site_dim**3


def decoupling_constant(net: MeraNetwork) -> float:
    """Constant C = 2 d^2 (d the elementary-block dimension) in the
    decoupling-defect bound C 2^(-nu (s - log2|A|))."""
    return 2.0 * block_dim(net) ** 2


def local_recovery_constant(net: MeraNetwork) -> float:
    """Calibrated constant c = 2 sqrt(2) sqrt(2 d^2) in the local
    recovery-error bound c (|A|/x)^(nu/2), obtained by chaining the
    decoupling bound with the recoverability and metric inequalities."""
    return 2.0 * math.sqrt(2.0) * math.sqrt(2.0 * block_dim(net) ** 2)


# ---------------------------------------------------------------------------
# State distances


def _check_state(rho: np.ndarray, name: str) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise QecError(f"{name} is not a square matrix")
    if np.abs(rho - rho.conj().T).max() > STATE_TOL:
        raise QecError(f"{name} is not Hermitian")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -STATE_TOL:
        raise QecError(f"{name} has negative eigenvalue {evals.min()}")
    if abs(evals.sum() - 1.0) > STATE_TOL:
        raise QecError(f"{name} has trace {evals.sum()}, expected 1")
    return rho


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(rho)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity F = tr sqrt(sqrt(rho) sigma sqrt(rho))."""
    rho = _check_state(rho, "rho")
    sigma = _check_state(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise QecError("states live on different dimensions")
    sr = _psd_sqrt(rho)
    m = sr @ sigma @ sr
    evals = np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0.0, None)
    return float(np.sqrt(evals).sum())


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """||rho - sigma||_1."""
    rho = _check_state(rho, "rho")
    sigma = _check_state(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise QecError("states live on different dimensions")
    return float(np.abs(np.linalg.eigvalsh(rho - sigma)).sum())


def bures_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """sqrt(1 - F): orthogonal pure states are at distance 1, and
    2 B^2 <= ||rho - sigma||_1 <= 2 sqrt(2) B."""
    f = min(fidelity(rho, sigma), 1.0)
    return float(math.sqrt(1.0 - f))


def bures_sandwich(rho: np.ndarray, sigma: np.ndarray) -> tuple[float, float, float]:
    """(2 B^2, trace distance, 2 sqrt(2) B) for the metric sandwich."""
    b = bures_distance(rho, sigma)
    t = trace_distance(rho, sigma)
    return 2.0 * b * b, t, 2.0 * math.sqrt(2.0) * b


# ---------------------------------------------------------------------------
# Codes and reports


@dataclass
class CodeSpec:
    """A code: the image of the scale-s Hilbert space under the layers
    below it, together with a seeded codeword-sampling strategy."""

    net: MeraNetwork
    scale: int
    sampler_seed: int = 1234
    num_codewords: int = DEFAULT_CODEWORD_SAMPLES

    def __post_init__(self):
        if not 1 <= self.scale <= self.net.num_layers:
            raise QecError(
                f"code scale {self.scale} outside [1, {self.net.num_layers}]"
            )
        self._nu = None

    @property
    def top_dim(self) -> int:
        return self.net.top_dim(self.scale)

    def nu(self) -> float:
        """Scaling dimension of the network's transfer operator (cached)."""
        if self._nu is None:
            from .channels import (
                build_transfer_operator,
                scaling_dimension,
                spectral_decomposition,
            )

            sd = spectral_decomposition(build_transfer_operator(self.net))
            self._nu = scaling_dimension(sd)
        return self._nu

    def codewords(self) -> list[tuple[str, np.ndarray]]:
        """Purified codewords as coefficient matrices c[t, r]: the
        maximally entangled input first, then seeded random pure states."""
        d_top = self.top_dim
        out = [("max-entangled", np.eye(d_top, dtype=complex) / math.sqrt(d_top))]
        rng = rng_from_seed(self.sampler_seed)
        for k in range(self.num_codewords):
            v = rng.normal(size=d_top) + 1j * rng.normal(size=d_top)
            v /= np.linalg.norm(v)
            out.append((f"pure-{k}", v.reshape(d_top, 1)))
        return out


@dataclass(frozen=True)
class BoundReport:
    """Measured quantity against its analytic bound."""

    claim: str
    lhs: float
    rhs: float
    constants: dict
    satisfied: bool
    margin: float
    seeds: tuple = ()

    @classmethod
    def create(cls, claim, lhs, rhs, constants, seeds=()) -> "BoundReport":
        margin = rhs - lhs
        return cls(
            claim=claim,
            lhs=float(lhs),
            rhs=float(rhs),
            constants=dict(constants),
            satisfied=margin >= -BOUND_TOL,
            margin=float(margin),
            seeds=tuple(seeds),
        )

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constants": self.constants,
            "satisfied": self.satisfied,
            "margin": self.margin,
            "seeds": list(self.seeds),
        }


def _region_at_zero(sites) -> Region:
    return Region(0, tuple(sorted(int(x) for x in sites)))


def _max_entangled(code: CodeSpec) -> np.ndarray:
    d_top = code.top_dim
    return np.eye(d_top, dtype=complex) / math.sqrt(d_top)


# ---------------------------------------------------------------------------
# Decoupling


def decoupling_defect(
    code: CodeSpec,
    region_a: Region,
    op: np.ndarray | None = None,
    num_samples: int = DEFAULT_OPERATOR_SAMPLES,
) -> float:
    """|tr[(rho^{AR} - rho^A x rho^R) O]| for the maximally-entangled-input
    codeword.

    With ``op=None`` returns the worst case over unit-spectral-norm
    observables, which equals the trace norm of the correlation part
    (attained by its polar unitary); a seeded sample of product
    observables is also taken and can only confirm the maximum.
    """
    delta = _decoupling_delta(code, region_a)
    if op is not None:
        if op.shape != delta.shape:
            raise QecError(f"observable shape {op.shape}, expected {delta.shape}")
        return float(abs(np.trace(delta @ op)))
    worst = float(np.abs(np.linalg.eigvalsh(delta)).sum())
    d_a = code.net.site_dim ** len(region_a.sites)
    d_r = delta.shape[0] // d_a
    rng = rng_from_seed(code.sampler_seed + 1)
    for _ in range(num_samples):
        o_a = _haar_unitary(rng, d_a)
        o_r = _haar_unitary(rng, d_r)
        val = float(abs(np.trace(delta @ np.kron(o_a, o_r))))
        worst = max(worst, val)
    return worst


def decoupling_bures(code: CodeSpec, region_a: Region) -> float:
    """Bures distance between rho^{AR} and rho^A x rho^R for the
    maximally-entangled-input codeword."""
    rho_ar, rho_prod = _decoupling_pair(code, region_a)
    return bures_distance(rho_ar, rho_prod)


def _decoupling_pair(code: CodeSpec, region_a: Region):
    factor = code_factor(code.net, code.scale, region_a)
    c = _max_entangled(code)
    rho_ar = codeword_rdm(factor, c, keep_reference=True)
    d_a = code.net.site_dim ** len(region_a.sites)
    d_r = rho_ar.shape[0] // d_a
    rho_a = np.trace(rho_ar.reshape(d_a, d_r, d_a, d_r), axis1=1, axis2=3)
    rho_r = np.trace(rho_ar.reshape(d_a, d_r, d_a, d_r), axis1=0, axis2=2)
    return rho_ar, np.kron(rho_a, rho_r)


def _decoupling_delta(code: CodeSpec, region_a: Region) -> np.ndarray:
    rho_ar, rho_prod = _decoupling_pair(code, region_a)
    return rho_ar - rho_prod


def _haar_unitary(rng, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def verify_decoupling_bound(code: CodeSpec, region_a: Region) -> BoundReport:
    """Worst-case defect against C 2^(-nu (s - log2|A|))."""
    if not region_a.is_simply_connected(code.net.n_phys):
        raise RegionError("decoupling bound requires a simply connected region")
    defect = decoupling_defect(code, region_a)
    nu = code.nu()
    c_const = decoupling_constant(code.net)
    rhs = c_const * 2.0 ** (-nu * (code.scale - math.log2(len(region_a.sites))))
    return BoundReport.create(
        claim="decoupling defect <= C 2^(-nu (s - log2|A|))",
        lhs=defect,
        rhs=rhs,
        constants={
            "C": c_const,
            "nu": nu,
            "d": block_dim(code.net),
            "s": code.scale,
            "A_size": len(region_a.sites),
        },
        seeds=_net_seeds(code),
    )


def _net_seeds(code: CodeSpec):
    seed = code.net.provenance.get("seed")
    return () if seed is None else (seed,)


# ---------------------------------------------------------------------------
# Petz recovery


@dataclass
class RecoveryMap:
    """CPTP map from states on B to states on AB, reversing erasure of A
    with respect to the code's maximally-entangled-input marginal."""

    a_sites: tuple[int, ...]
    b_sites: tuple[int, ...]
    construction: str
    _frame: "_PetzFrame"
    kraus_dense: tuple[np.ndarray, ...] | None = None

    @property
    def channel(self):
        """Dense adjoint (operators on AB -> operators on B); available
        when the region is small enough to materialize."""
        if self.kraus_dense is None:
            raise QecError(
                "region too large for a dense channel; use the factored form"
            )
        from .channels import channel_from_kraus

        return channel_from_kraus(self.kraus_dense)


class _PetzFrame:
    """All recovery algebra expressed in the causal-cone frame.

    Frame columns are B_{(a,t,e)} = F[(a, :), t, e] viewed as vectors on
    B; their Gram T0 is the only large contraction.  The reference state
    marginals are sigma_AB = V' V'^dag and sigma_B = W' W'^dag with
    V', W' the frame columns scaled by sqrt(D_noncone / D_top), so
    sigma square roots, pseudo-inverses and the support projector are
    small matrices sandwiched between frame maps.
    """

    def __init__(self, code: CodeSpec, region_a: Region, region_b: Region):
        net = code.net
        d = net.site_dim
        a_sites, b_sites = region_a.sites, region_b.sites
        if set(a_sites) & set(b_sites):
            raise QecError("regions A and B overlap")
        self.code = code
        self.a_sites, self.b_sites = a_sites, b_sites
        region = _region_at_zero(a_sites + b_sites)
        factor = code_factor(net, code.scale, region)
        self.dim_a = d ** len(a_sites)
        self.dim_b = d ** len(b_sites)
        self.dc = d ** len(factor.cone_top)
        self.dn = d ** len(factor.noncone_top)
        self.env = factor.env_dim
        self.d_top = code.top_dim

        # Reorder the factor so the A sites form the leading axis block.
        n_r = len(region.sites)
        perm = [region.sites.index(x) for x in a_sites]
        perm += [region.sites.index(x) for x in b_sites]
        perm += list(range(n_r, factor.tensor.ndim))
        f4 = np.ascontiguousarray(factor.tensor.transpose(perm)).reshape(
            self.dim_a, self.dim_b, self.dc * self.env
        )
        del factor  # free the unordered copy before the large product

        # Frame Gram over the B index: the single large contraction.
        fb = np.ascontiguousarray(f4.transpose(1, 0, 2)).reshape(
            self.dim_b, self.dim_a * self.dc * self.env
        )
        # f4 is only needed again to materialize a dense recovery map.
        self.f4 = f4 if self.dim_a * self.dim_b <= DENSE_DIM else None
        del f4
        self.t0 = fb.conj().T @ fb
        del fb
        m = self.dim_a * self.dc * self.env
        g0 = (
            self.t0.reshape(self.dim_a, self.dc * self.env, self.dim_a, -1)
            .trace(axis1=0, axis2=2)
        )
        self.g0 = g0
        self.scale0 = self.dn / self.d_top

        # sigma_AB = V' V'^dag, Gram scale0 * g0.
        lam, h = np.linalg.eigh(self.scale0 * _hermitize(g0))
        keep = lam >= PSEUDO_INV_CUTOFF
        lam, h = lam[keep], h[:, keep]
        self.s_sqrt_ab = (h / np.sqrt(lam)) @ h.conj().T  # V' s V'^dag = sqrt(sigma)

        # sigma_B = W' W'^dag, Gram scale0 * t0.
        mu, g = np.linalg.eigh(self.scale0 * _hermitize(self.t0))
        keepb = mu >= PSEUDO_INV_CUTOFF
        mu, g = mu[keepb], g[:, keepb]
        self.s_invsqrt_b = (g * mu**-1.5) @ g.conj().T  # W' s W'^dag = sigma^(-1/2)
        self.s_proj_b = (g / mu) @ g.conj().T  # W' s W'^dag = support projector

        # R_k[(t,e), f'] = V'^dag (|k> x W') in frame coordinates.
        self.r_k = self.scale0 * self.t0.reshape(
            self.dim_a, self.dc * self.env, m
        )

    # -- codeword machinery -------------------------------------------------

    def _coeffs(self, c: np.ndarray):
        """c3[t_cone, t_noncone, r] for a codeword matrix c[t, r]."""
        dim_r = c.shape[1]
        return c.reshape(self.dc, self.dn, dim_r), dim_r

    def codeword_columns(self, c: np.ndarray):
        """Frame data for one codeword: recovered columns y_{k,a} in the
        V' frame, the true state in the V' frame, its norm, and the
        support deficit.  Retained labels are ordered (r, n, e)."""
        c3, dim_r = self._coeffs(c)
        m = self.dim_a * self.dc * self.env
        t0r = self.t0.reshape(m, self.dim_a, self.dc, self.env)
        # z[f; a, r, n, e] = W'^dag psi_a  (e is both the column's frame
        # environment and the retained one: the factor is diagonal there)
        z = math.sqrt(self.scale0) * np.einsum(
            "faue,unr->farne", t0r, c3, optimize=True
        )
        # y_{k,a} = S_sqrtAB R_k S_invB z_a   (V'-frame coordinates)
        sz = np.einsum("fg,garne->farne", self.s_invsqrt_b, z, optimize=True)
        y = np.einsum("kif,farne->kiarne", self.r_k, sz, optimize=True)
        y = np.einsum("ij,kjarne->kiarne", self.s_sqrt_ab, y, optimize=True)
        # v0[(t,e); r, n, f] = V'^dag psi
        t6 = self.t0.reshape(
            self.dim_a, self.dc, self.env, self.dim_a, self.dc, self.env
        )
        td = np.einsum("ateauf->teuf", t6, optimize=True)
        v0 = math.sqrt(self.scale0) * np.einsum(
            "teuf,unr->ternf", td, c3, optimize=True
        )
        norm2 = float(
            np.einsum("tnr,ateaue,unr->", np.conj(c3), t6, c3, optimize=True).real
        )
        pz = np.einsum("fg,garne->farne", self.s_proj_b, z, optimize=True)
        supported = float(np.einsum("farne,farne->", np.conj(z), pz).real)
        deficit = max(norm2 - supported, 0.0)
        return _CodewordData(
            y=y,
            v0=v0.reshape(self.dc * self.env, dim_r * self.dn * self.env),
            norm2=norm2,
            deficit=deficit,
        )

    def recovery_error_for(self, c: np.ndarray) -> float:
        """Trace distance between the recovered and true purified states
        for one codeword (environment and reference retained)."""
        data = self.codeword_columns(c)
        g_sigma = self.scale0 * _hermitize(self.g0)
        y = data.y  # (k, i, a, r, n, e)
        k_dim, i_dim, a_dim = y.shape[0], y.shape[1], y.shape[2]
        ret = y.shape[3] * y.shape[4] * y.shape[5]
        ycols = y.reshape(k_dim, i_dim, a_dim, ret).transpose(0, 2, 1, 3)
        ycols = ycols.reshape(k_dim * a_dim, i_dim, ret)
        v0 = data.v0
        # Gram of [recovered columns, true state]
        gy = np.einsum("xiu,ij,yju->xy", np.conj(ycols), g_sigma, ycols, optimize=True)
        cross = np.einsum("xiu,iu->x", np.conj(ycols), v0, optimize=True)
        n_cols = k_dim * a_dim + 1
        gram = np.zeros((n_cols, n_cols), dtype=complex)
        gram[:-1, :-1] = gy
        gram[:-1, -1] = cross
        gram[-1, :-1] = np.conj(cross)
        gram[-1, -1] = data.norm2
        signs = np.ones(n_cols)
        signs[-1] = -1.0
        lam, u = np.linalg.eigh(_hermitize(gram))
        lam = np.clip(lam, 0.0, None)
        root = u * np.sqrt(lam)
        core = root.conj().T * signs @ root
        err = float(np.abs(np.linalg.eigvalsh(_hermitize(core))).sum())
        return err + data.deficit

    # -- dense materialization ----------------------------------------------

    def dense_kraus(self) -> tuple[np.ndarray, ...]:
        if self.dim_a * self.dim_b > DENSE_DIM:
            raise QecError("region too large to materialize dense recovery")
        v_cols = math.sqrt(self.scale0) * self.f4.reshape(
            self.dim_a * self.dim_b, -1
        )
        sigma_ab = v_cols @ v_cols.conj().T
        sqrt_ab = _psd_sqrt(sigma_ab)
        w_cols = math.sqrt(self.scale0) * np.ascontiguousarray(
            self.f4.transpose(1, 0, 2)
        ).reshape(self.dim_b, -1)
        sigma_b = w_cols @ w_cols.conj().T
        mu, g = np.linalg.eigh(_hermitize(sigma_b))
        keep = mu >= PSEUDO_INV_CUTOFF
        inv_sqrt_b = (g[:, keep] / np.sqrt(mu[keep])) @ g[:, keep].conj().T
        kraus = []
        for k in range(self.dim_a):
            ket = np.zeros((self.dim_a, 1), dtype=complex)
            ket[k, 0] = 1.0
            kraus.append(sqrt_ab @ np.kron(ket, inv_sqrt_b))
        # CPTP completion: route the null-space weight to a fixed state.
        total = sum(kk.conj().T @ kk for kk in kraus)
        defect = np.eye(self.dim_b) - total
        mu_d, g_d = np.linalg.eigh(_hermitize(defect))
        fix = np.zeros((self.dim_a * self.dim_b, 1), dtype=complex)
        fix[0, 0] = 1.0
        for j in np.nonzero(mu_d > PSEUDO_INV_CUTOFF)[0]:
            kraus.append(math.sqrt(mu_d[j]) * fix @ g_d[:, j : j + 1].conj().T)
        return tuple(kraus)


@dataclass
class _CodewordData:
    y: np.ndarray
    v0: np.ndarray
    norm2: float
    deficit: float


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def petz_recovery(code: CodeSpec, region_a: Region, region_b: Region) -> RecoveryMap:
    """Recovery map for erasure of A using only B, built from the
    maximally-entangled-input marginal sigma_AB:
    R(X) = sigma_AB^(1/2) (I_A x sigma_B^(-1/2) X sigma_B^(-1/2)) sigma_AB^(1/2),
    completed to trace preserving off the support of sigma_B."""
    frame = _PetzFrame(code, region_a, region_b)
    kraus = None
    if frame.dim_a * frame.dim_b <= DENSE_DIM:
        kraus = frame.dense_kraus()
    return RecoveryMap(
        a_sites=region_a.sites,
        b_sites=region_b.sites,
        construction="petz",
        _frame=frame,
        kraus_dense=kraus,
    )


def recovery_error(
    code: CodeSpec,
    region_a: Region,
    region_b: Region,
    recovery: RecoveryMap | None = None,
) -> float:
    """Max over sampled purified codewords of the trace distance between
    the recovered state and the true state (environment retained, so this
    equals the error on the full system)."""
    if recovery is None:
        recovery = petz_recovery(code, region_a, region_b)
    if recovery.a_sites != region_a.sites or recovery.b_sites != region_b.sites:
        raise QecError("recovery map was built for different regions")
    return max(
        recovery._frame.recovery_error_for(c) for _, c in code.codewords()
    )


# ---------------------------------------------------------------------------
# Bound verifiers


def verify_simply_connected_correctability(
    code: CodeSpec, region_a: Region, scale: int | None = None
) -> BoundReport:
    """Erasure of a simply connected region is correctable from its
    complement with error at most C 2^(-nu (s - log2|A|) / 2)."""
    if scale is not None and scale != code.scale:
        code = CodeSpec(code.net, scale, code.sampler_seed, code.num_codewords)
    if not region_a.is_simply_connected(code.net.n_phys):
        raise RegionError("correctability bound requires a simply connected region")
    complement = _region_at_zero(
        x for x in range(code.net.n_phys) if x not in region_a.sites
    )
    err = recovery_error(code, region_a, complement)
    nu = code.nu()
    c_const = decoupling_constant(code.net)
    rhs = c_const * 2.0 ** (-nu * (code.scale - math.log2(len(region_a.sites))) / 2.0)
    return BoundReport.create(
        claim="recovery error from the complement <= C 2^(-nu (s - log2|A|)/2)",
        lhs=err,
        rhs=rhs,
        constants={
            "C": c_const,
            "nu": nu,
            "d": block_dim(code.net),
            "s": code.scale,
            "A_size": len(region_a.sites),
        },
        seeds=_net_seeds(code),
    )


def shield_region(net: MeraNetwork, region_a: Region, x: int) -> Region:
    """Sites within circular distance <= x of A, excluding A itself."""
    n = net.n_phys
    sites = set()
    for a in region_a.sites:
        for delta in range(-x, x + 1):
            sites.add((a + delta) % n)
    return _region_at_zero(sites - set(region_a.sites))


def verify_local_correctability(code: CodeSpec, region_a: Region, x: int) -> BoundReport:
    """Erasure of A is correctable from a shield of radius x with error
    at most c (|A|/x)^(nu/2)."""
    region_b = shield_region(code.net, region_a, x)
    n_ab = len(region_a.sites) + len(region_b.sites)
    if n_ab >= 2**code.scale:
        raise QecError(
            f"|AB| = {n_ab} must be smaller than 2^s = {2**code.scale}"
        )
    err = recovery_error(code, region_a, region_b)
    nu = code.nu()
    c_const = local_recovery_constant(code.net)
    rhs = c_const * (len(region_a.sites) / x) ** (nu / 2.0)
    return BoundReport.create(
        claim="local recovery error <= c (|A|/x)^(nu/2)",
        lhs=err,
        rhs=rhs,
        constants={
            "c": c_const,
            "nu": nu,
            "d": block_dim(code.net),
            "s": code.scale,
            "A_size": len(region_a.sites),
            "x": x,
        },
        seeds=_net_seeds(code),
    )


# ---------------------------------------------------------------------------
# Union of recoveries


def union_correctability(
    code: CodeSpec,
    a1: Region,
    b1: Region,
    a2: Region,
    b2: Region,
) -> BoundReport:
    """Joint recovery of two regions with disjoint shields: composing the
    two local recoveries gives error at most the sum of the individual
    errors."""
    s1 = set(a1.sites) | set(b1.sites)
    s2 = set(a2.sites) | set(b2.sites)
    if s1 & s2:
        raise QecError("shielded regions overlap; joint recovery undefined")
    r1 = petz_recovery(code, a1, b1)
    r2 = petz_recovery(code, a2, b2)
    if r1.kraus_dense is None or r2.kraus_dense is None:
        raise QecError("union verification needs dense recoveries (regions too large)")
    eps1 = recovery_error(code, a1, b1, r1)
    eps2 = recovery_error(code, a2, b2, r2)
    joint = _joint_recovery_error(code, (a1, b1, r1), (a2, b2, r2))
    return BoundReport.create(
        claim="joint recovery error <= eps_1 + eps_2",
        lhs=joint,
        rhs=eps1 + eps2,
        constants={"eps_1": eps1, "eps_2": eps2},
        seeds=_net_seeds(code),
    )


def _joint_recovery_error(code: CodeSpec, first, second) -> float:
    d = code.net.site_dim
    (a1, b1, r1), (a2, b2, r2) = first, second
    region = _region_at_zero(a1.sites + b1.sites + a2.sites + b2.sites)
    factor = code_factor(code.net, code.scale, region)
    worst = 0.0
    for _, c in code.codewords():
        p = codeword_purification(factor, c)
        dim_reg, dim_r, paired = p.shape
        psi = p.reshape([d] * len(region.sites) + [dim_r * paired])
        cols = [psi.reshape(-1)]
        signs = [-1.0]
        for phi in _apply_joint_kraus(psi, region, (a1, b1, r1), (a2, b2, r2), d):
            cols.append(phi.reshape(-1))
            signs.append(1.0)
        mat = np.stack(cols, axis=1)
        gram = mat.conj().T @ mat
        lam, u = np.linalg.eigh(_hermitize(gram))
        root = u * np.sqrt(np.clip(lam, 0.0, None))
        core = root.conj().T * np.array(signs) @ root
        worst = max(worst, float(np.abs(np.linalg.eigvalsh(_hermitize(core))).sum()))
    return worst


def _apply_joint_kraus(psi, region, first, second, d):
    """Columns (K1_i x K2_j) <a1| <a2| psi over all Kraus and A-basis
    indices, keeping the site axes in canonical region order."""
    (a1, b1, r1), (a2, b2, r2) = first, second
    for pa1 in _single_region_columns(psi, region, a1, b1, r1, d):
        yield from _single_region_columns(pa1, region, a2, b2, r2, d)


def _single_region_columns(psi, region, ra, rb, rmap, d):
    """Apply one recovery: for each (kraus, erased-basis) pair yield the
    resulting tensor with site axes back in region order."""
    a_axes = [region.sites.index(x) for x in ra.sites]
    b_axes = [region.sites.index(x) for x in rb.sites]
    ab_sites = ra.sites + rb.sites
    n_sites = len(region.sites)
    dim_b = d ** len(rb.sites)
    for kr in rmap.kraus_dense:
        kt = kr.reshape([d] * len(ab_sites) + [dim_b])
        for a_idx in np.ndindex(*([d] * len(ra.sites))):
            sub = psi
            for ax, val in sorted(zip(a_axes, a_idx), reverse=True):
                sub = np.take(sub, val, axis=ax)
            rem_sites = [x for x in region.sites if x not in ra.sites]
            b_pos = [rem_sites.index(x) for x in rb.sites]
            sub = np.tensordot(
                kt.reshape(d ** len(ab_sites), dim_b),
                np.moveaxis(sub, b_pos, range(len(b_pos))).reshape(dim_b, -1),
                axes=([1], [0]),
            )
            # axes now: AB block, then remaining sites (order: rem minus B), tail
            rem_minus_b = [x for x in rem_sites if x not in rb.sites]
            out = sub.reshape(
                [d] * len(ab_sites) + [d] * len(rem_minus_b) + [-1]
            )
            cur_sites = list(ab_sites) + rem_minus_b
            order = [cur_sites.index(x) for x in region.sites]
            yield out.transpose(order + [len(cur_sites)]).reshape(
                [d] * n_sites + [-1]
            )


# ---------------------------------------------------------------------------
# Distance exponent and nested partitions


def distance_exponent(z: float) -> float:
    """alpha = log 2 / log(2z / (z - 1)); the code-distance scaling
    exponent for shield-to-region ratio z."""
    if z <= 1:
        raise QecError(f"shield ratio z must exceed 1, got {z}")
    return math.log(2.0) / math.log(2.0 * z / (z - 1.0))


def uberholography_partition(region_ab: Region, z: float, levels: int):
    """Recursively remove the correctable middle of each piece, keeping
    two outer pieces of floor((z-1)/(2z) |piece|) sites each.

    Returns (per_level, survivors): per_level[g] is the list of Regions
    at depth g (2^g pieces) and survivors is the surviving-site count at
    the deepest level.
    """
    if z <= 1:
        raise QecError(f"shield ratio z must exceed 1, got {z}")
    if levels < 0:
        raise QecError("levels must be non-negative")
    frac = (z - 1.0) / (2.0 * z)
    sites = list(region_ab.sites)
    pieces = [sites]
    per_level = [[region_ab]]
    for g in range(levels):
        nxt = []
        for piece in pieces:
            child = int(math.floor(frac * len(piece)))
            if child < 1:
                raise QecError(
                    f"partition infeasible beyond depth {g}: pieces of "
                    f"{len(piece)} sites cannot split (max feasible depth {g})"
                )
            nxt.append(piece[:child])
            nxt.append(piece[len(piece) - child :])
        pieces = nxt
        per_level.append(
            [Region(region_ab.scale, tuple(p)) for p in pieces]
        )
    survivors = sum(len(p) for p in pieces)
    return per_level, survivors
