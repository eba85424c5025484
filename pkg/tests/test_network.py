import numpy as np
import pytest

from meraqec.network import (
    MeraNetwork,
    Region,
    RegionError,
    ascend_operator,
    causal_cone,
    cone_step,
    encode_state,
    encoding_isometry,
    network_from_json,
    network_to_json,
    parents_of,
    random_mera,
    trivial_mera,
)
from meraqec.tensors import apply_operator_to_axes, dagger, rng_from_seed


def _reachability_cone(net, region, s_to):
    """Graph oracle: iterate the parent relation site by site."""
    cones = [set(region.sites)]
    for s in range(region.scale, s_to):
        n_coarse = net.sites_at_scale(s + 1)
        nxt = set()
        for f in cones[-1]:
            nxt.update(parents_of(f, n_coarse))
        cones.append(nxt)
    return cones


def test_network_shapes_and_laws():
    net = random_mera(2, 3, base_sites=1, seed=0)
    d = net.site_dim
    assert net.n_phys == 8
    assert np.allclose(dagger(net.isometry) @ net.isometry, np.eye(d), atol=1e-12)
    assert np.allclose(
        dagger(net.disentangler) @ net.disentangler, np.eye(d * d), atol=1e-12
    )


@pytest.mark.parametrize("seed", [0, 1])
@pytest.mark.parametrize("sites", [(0,), (3,), (0, 1), (5, 6, 7)])
def test_causal_cone_matches_reachability(seed, sites):
    net = random_mera(2, 4, base_sites=1, seed=seed)
    region = Region(0, sites)
    cones = causal_cone(net, region, 4)
    oracle = _reachability_cone(net, region, 4)
    for s, cone in enumerate(cones):
        assert set(cone.sites) == oracle[s]


def test_cone_step_widens_slowly():
    net = random_mera(2, 5, base_sites=1, seed=0)
    region = Region(0, (7,))
    for _ in range(4):
        nxt = cone_step(net, region)
        assert len(nxt.sites) <= max(3, len(region.sites))
        region = nxt


def test_region_simply_connected():
    assert Region(0, (2, 3, 4)).is_simply_connected(8)
    assert Region(0, (7, 0, 1)).is_simply_connected(8)  # wraps
    assert not Region(0, (0, 2)).is_simply_connected(8)
    assert Region(0, tuple(range(8))).is_simply_connected(8)


def test_encoding_isometry_is_isometric():
    net = random_mera(2, 3, base_sites=1, seed=1)
    iso = encoding_isometry(net)
    d_top = net.top_dim(3)
    assert iso.shape == (2**8, d_top)
    assert np.allclose(dagger(iso) @ iso, np.eye(d_top), atol=1e-10)


def test_encode_state_matches_isometry_columns():
    net = random_mera(2, 3, base_sites=1, seed=2)
    iso = encoding_isometry(net)
    d_top = net.top_dim(3)
    rng = rng_from_seed(5)
    phi = rng.normal(size=d_top) + 1j * rng.normal(size=d_top)
    phi /= np.linalg.norm(phi)
    assert np.allclose(encode_state(net, phi), iso @ phi, atol=1e-10)


def test_ascend_operator_dense_oracle():
    """<encode(phi)| O |encode(psi)> = <phi| ascend(O) |psi>."""
    net = random_mera(2, 3, base_sites=1, seed=3)
    d = net.site_dim
    rng = rng_from_seed(6)
    m = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    op = (m + m.conj().T) / 2
    region = Region(0, (2, 3))
    asc, reg_s = ascend_operator(net, op, region, 3)
    d_top = net.top_dim(3)
    for trial in range(3):
        phi = rng.normal(size=d_top) + 1j * rng.normal(size=d_top)
        psi = rng.normal(size=d_top) + 1j * rng.normal(size=d_top)
        enc_phi = encode_state(net, phi)
        enc_psi = encode_state(net, psi)
        lhs = enc_phi.conj() @ apply_operator_to_axes(
            op, enc_psi.reshape([d] * net.n_phys), (2, 3), d
        ).reshape(-1)
        top_sites = net.sites_at_scale(3)
        rhs = phi.conj() @ apply_operator_to_axes(
            asc, psi.reshape([d] * top_sites), tuple(reg_s.sites), d
        ).reshape(-1)
        assert abs(lhs - rhs) < 1e-10


def test_ascend_identity_is_identity():
    net = random_mera(2, 3, base_sites=1, seed=4)
    asc, reg = ascend_operator(net, np.eye(4, dtype=complex), Region(0, (0, 1)), 2)
    assert np.allclose(asc, np.eye(asc.shape[0]), atol=1e-10)


def test_trivial_mera_product_structure():
    net = trivial_mera(3)
    phi = np.array([0.6, 0.8], dtype=complex)
    psi = encode_state(net, phi)
    # pass-through isometries put the logical qubit on site 0, |0> elsewhere
    expected = np.zeros(2**8, dtype=complex)
    expected[0] = 0.6
    expected[2**7] = 0.8
    assert np.allclose(psi, expected, atol=1e-12)


def test_serialization_roundtrip():
    net = random_mera(2, 3, base_sites=1, seed=7)
    back = network_from_json(network_to_json(net))
    assert back.site_dim == net.site_dim
    assert back.num_layers == net.num_layers
    assert np.allclose(back.disentangler, net.disentangler, atol=1e-15)
    assert np.allclose(back.isometry, net.isometry, atol=1e-15)


def test_invalid_region_rejected():
    net = random_mera(2, 3, base_sites=1, seed=0)
    with pytest.raises(RegionError):
        causal_cone(net, Region(0, (99,)), 3)
