import math

import numpy as np
import pytest

from meraqec.network import Region, encoding_isometry, random_mera, trivial_mera
from meraqec.qec import (
    BoundReport,
    CodeSpec,
    QecError,
    bures_distance,
    bures_sandwich,
    decoupling_constant,
    decoupling_defect,
    distance_exponent,
    fidelity,
    petz_recovery,
    recovery_error,
    shield_region,
    trace_distance,
    uberholography_partition,
    union_correctability,
    verify_decoupling_bound,
    verify_local_correctability,
    verify_simply_connected_correctability,
)
from meraqec.tensors import rng_from_seed


def _random_state(seed, dim):
    rng = rng_from_seed(seed)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


# ---------------------------------------------------------------------------
# Distances


def test_trace_distance_diagonal():
    rho = np.diag([0.7, 0.3]).astype(complex)
    sigma = np.diag([0.4, 0.6]).astype(complex)
    assert trace_distance(rho, sigma) == pytest.approx(0.6, abs=1e-12)


def test_fidelity_pure_states():
    a = np.array([1, 0], dtype=complex)
    b = np.array([1, 1], dtype=complex) / math.sqrt(2)
    rho = np.outer(a, a.conj())
    sigma = np.outer(b, b.conj())
    assert fidelity(rho, sigma) == pytest.approx(1 / math.sqrt(2), abs=1e-10)
    # orthogonal pure states sit at Bures distance 1
    c = np.array([0, 1], dtype=complex)
    tau = np.outer(c, c.conj())
    assert bures_distance(rho, tau) == pytest.approx(1.0, abs=1e-10)
    assert bures_distance(rho, rho) == pytest.approx(0.0, abs=1e-7)


def test_bures_sandwich():
    for seed in range(5):
        rho = _random_state(seed, 4)
        sigma = _random_state(seed + 50, 4)
        lo, mid, hi = bures_sandwich(rho, sigma)
        assert lo <= mid + 1e-10 <= hi + 2e-10
        b = bures_distance(rho, sigma)
        assert lo == pytest.approx(2 * b * b, abs=1e-9)
        assert mid == pytest.approx(trace_distance(rho, sigma), abs=1e-9)
        assert hi == pytest.approx(2 * math.sqrt(2) * b, abs=1e-9)


# ---------------------------------------------------------------------------
# Decoupling


def test_trivial_code_decouples_off_carrier():
    net = trivial_mera(3)
    code = CodeSpec(net, 3, num_codewords=2)
    for sites in [(3,), (4, 5), (1, 2, 3)]:
        assert decoupling_defect(code, Region(0, sites)) < 1e-10


def test_trivial_code_carrier_site_correlates():
    net = trivial_mera(3)
    code = CodeSpec(net, 3, num_codewords=2)
    assert decoupling_defect(code, Region(0, (0,))) > 0.1


def test_identity_scale_code_defect_oracle():
    """One-layer code, A = one site: the defect equals the trace norm of
    the correlation part of the directly constructed purification."""
    net = random_mera(2, 1, base_sites=2, seed=0)
    code = CodeSpec(net, 1, num_codewords=2)
    region = Region(0, (0,))
    defect = decoupling_defect(code, region)
    iso = encoding_isometry(net, 1)
    d_top = net.top_dim(1)
    c = np.eye(d_top, dtype=complex) / math.sqrt(d_top)
    psi = (iso @ c).reshape(2, 2 ** (net.n_phys - 1), d_top)
    v = psi.transpose(0, 2, 1).reshape(2 * d_top, -1)
    rho_ar = v @ v.conj().T
    dims = (2, d_top)
    rho_a = np.trace(rho_ar.reshape(2, d_top, 2, d_top), axis1=1, axis2=3)
    rho_r = np.trace(rho_ar.reshape(2, d_top, 2, d_top), axis1=0, axis2=2)
    delta = rho_ar - np.kron(rho_a, rho_r)
    oracle = np.abs(np.linalg.eigvalsh((delta + delta.conj().T) / 2)).sum()
    assert defect == pytest.approx(oracle, abs=1e-10)


@pytest.mark.parametrize("seed", [0, 1])
def test_lemma3_bound(seed):
    net = random_mera(2, 4, base_sites=1, seed=seed)
    code = CodeSpec(net, 4, num_codewords=4)
    for sites in [(0,), (0, 1)]:
        rep = verify_decoupling_bound(code, Region(0, sites))
        assert rep.satisfied
        assert rep.constants["C"] == decoupling_constant(net)


# ---------------------------------------------------------------------------
# Recovery


def _dense_recovery_error(code, region_a, region_b, rmap):
    """Full-statevector oracle for the worst-codeword recovery error."""
    net = code.net
    d = net.site_dim
    n = net.n_phys
    iso = encoding_isometry(net, code.scale)
    a_sites, b_sites = list(region_a.sites), list(region_b.sites)
    rest = [x for x in range(n) if x not in a_sites + b_sites]
    dim_a = d ** len(a_sites)
    dim_b = d ** len(b_sites)
    worst = 0.0
    for _, c in code.codewords():
        dim_r = c.shape[1]
        psi = (iso @ c).reshape([d] * n + [dim_r])
        psi = psi.transpose(a_sites + b_sites + rest + [n])
        psi = psi.reshape(dim_a, dim_b, -1)
        true = psi.reshape(dim_a * dim_b, -1)
        rho_true = np.einsum("iu,jv->iujv", true, true.conj())
        dim_env = true.shape[1]
        rho_rec = np.zeros_like(rho_true)
        for k in rmap.kraus_dense:
            for a in range(dim_a):
                col = np.tensordot(k, psi[a], axes=([1], [0]))
                rho_rec += np.einsum("iu,jv->iujv", col, col.conj())
        delta = (rho_rec - rho_true).reshape(
            dim_a * dim_b * dim_env, dim_a * dim_b * dim_env
        )
        err = np.abs(np.linalg.eigvalsh((delta + delta.conj().T) / 2)).sum()
        worst = max(worst, err)
    return worst


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_recovery_error_matches_dense_oracle(seed):
    net = random_mera(2, 3, base_sites=1, seed=seed)
    code = CodeSpec(net, 3, num_codewords=3)
    a = Region(0, (0,))
    b = shield_region(net, a, 1)
    rmap = petz_recovery(code, a, b)
    assert rmap.kraus_dense is not None
    thin = recovery_error(code, a, b, rmap)
    dense = _dense_recovery_error(code, a, b, rmap)
    assert thin == pytest.approx(dense, abs=1e-10)


def test_petz_kraus_trace_preserving():
    net = random_mera(2, 3, base_sites=1, seed=0)
    code = CodeSpec(net, 3, num_codewords=2)
    a = Region(0, (0,))
    b = shield_region(net, a, 1)
    rmap = petz_recovery(code, a, b)
    dim_b = 2 ** len(b.sites)
    total = sum(k.conj().T @ k for k in rmap.kraus_dense)
    assert np.abs(total - np.eye(dim_b)).max() < 1e-10


def test_trivial_code_perfect_recovery_off_carrier():
    net = trivial_mera(3)
    code = CodeSpec(net, 3, num_codewords=2)
    a = Region(0, (3,))
    b = shield_region(net, a, 1)
    assert recovery_error(code, a, b) < 1e-6


def test_recovery_error_bounded_by_bures():
    """Theorem 1 direction: error <= 2 sqrt(2) Bures(decoupling)."""
    from meraqec.qec import decoupling_bures

    for seed in range(3):
        net = random_mera(2, 4, base_sites=1, seed=seed)
        code = CodeSpec(net, 4, num_codewords=4)
        a = Region(0, (0,))
        rep = verify_simply_connected_correctability(code, a)
        assert rep.satisfied
        bd = decoupling_bures(code, a)
        assert rep.lhs <= 2 * math.sqrt(2) * bd + 1e-6


def test_local_correctability_shield_and_bound():
    net = random_mera(2, 4, base_sites=1, seed=0)
    assert shield_region(net, Region(0, (0,)), 2).sites == (1, 2, 14, 15)
    code = CodeSpec(net, 4, num_codewords=2)
    rep = verify_local_correctability(code, Region(0, (0,)), 2)
    assert rep.satisfied
    with pytest.raises(QecError):
        verify_local_correctability(code, Region(0, (0,)), 8)  # |AB| >= 2^s


def test_union_correctability():
    net = random_mera(2, 4, base_sites=1, seed=0)
    code = CodeSpec(net, 4, num_codewords=2)
    a1, a2 = Region(0, (0,)), Region(0, (8,))
    b1 = shield_region(net, a1, 1)
    b2 = shield_region(net, a2, 1)
    rep = union_correctability(code, a1, b1, a2, b2)
    assert rep.satisfied
    assert rep.lhs <= rep.constants["eps_1"] + rep.constants["eps_2"] + 1e-8


def test_union_rejects_overlapping_shields():
    net = random_mera(2, 4, base_sites=1, seed=0)
    code = CodeSpec(net, 4, num_codewords=2)
    a1, a2 = Region(0, (0,)), Region(0, (2,))
    with pytest.raises(QecError):
        union_correctability(
            code, a1, shield_region(net, a1, 1), a2, shield_region(net, a2, 1)
        )


# ---------------------------------------------------------------------------
# Uberholography


def test_distance_exponent_values():
    assert distance_exponent(3.0) == pytest.approx(
        math.log(2) / math.log(3), abs=1e-15
    )
    with pytest.raises(QecError):
        distance_exponent(1.0)


def test_uberholography_partition_arithmetic():
    region = Region(0, tuple(range(81)))
    per_level, survivors = uberholography_partition(region, 3.0, 3)
    frac = 2.0 / 6.0
    expected_size = 81
    for g, regions in enumerate(per_level):
        assert len(regions) == 2**g
        if g > 0:
            expected_size = int(math.floor(frac * expected_size))
            assert all(len(r.sites) == expected_size for r in regions)
    assert survivors == (2**3) * expected_size


def test_uberholography_infeasible_depth():
    region = Region(0, tuple(range(4)))
    with pytest.raises(QecError):
        uberholography_partition(region, 3.0, 3)


# ---------------------------------------------------------------------------
# Reports


def test_bound_report_margin():
    rep = BoundReport.create("x <= y", 1.0, 2.0, {"c": 3})
    assert rep.satisfied and rep.margin == 1.0
    bad = BoundReport.create("x <= y", 2.0, 1.0, {})
    assert not bad.satisfied
