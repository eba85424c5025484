"""Dense complex tensor arithmetic and operator decompositions.

Conventions used throughout the package:

* Tensors are plain ``numpy.ndarray`` objects with ``complex128`` dtype and
  row-major (C order) index layout.  A multi-site operator on sites
  ``(x_0 < x_1 < ... < x_{k-1})`` with local dimension ``d`` is stored as a
  ``(d**k, d**k)`` matrix whose row index is ``sum_i x_i * d**(k-1-i)``,
  i.e. the leftmost site is the most significant digit.
* Vectorization of operators is row-major: ``vec(O) = O.reshape(-1)``, so
  ``vec(A @ O @ B) = kron(A, B.T) @ vec(O)``.
* Randomness comes from numpy's Philox generator, a 64-bit counter-based
  PRNG with a published algorithm, so identical seeds give bit-identical
  tensors on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-10


class ContractError(ValueError):
    """Raised when a contraction pairs indices of unequal dimension."""


class ShapeError(ValueError):
    """Raised when an operator split or isometry shape is inconsistent."""


def contract(a: np.ndarray, b: np.ndarray, index_pairs) -> np.ndarray:
    """Contract tensor ``a`` with tensor ``b`` over the given index pairs.

    ``index_pairs`` is a list of ``(axis_of_a, axis_of_b)`` tuples.  The
    result carries the unpaired indices of ``a`` followed by the unpaired
    indices of ``b``, in their original order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    ax_a = [p[0] for p in index_pairs]
    ax_b = [p[1] for p in index_pairs]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise ContractError("an index may be paired at most once")
    for i, j in index_pairs:
        if a.shape[i] != b.shape[j]:
            raise ContractError(
                f"dimension mismatch for pair ({i}, {j}): "
                f"{a.shape[i]} != {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(ax_a, ax_b))


def rng_from_seed(seed: int) -> np.random.Generator:
    """Philox-backed generator; the package-wide seeding convention."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def random_isometry(out_dim: int, in_dim: int, seed: int) -> np.ndarray:
    """Haar-random isometry ``W`` with ``W.conj().T @ W == eye(in_dim)``.

    Sampled by QR-orthonormalizing a complex Gaussian matrix, with the
    R-diagonal phase fix that makes the distribution exactly Haar.
    """
    if out_dim < in_dim:
        raise ShapeError(
            f"isometry needs out_dim >= in_dim, got {out_dim} < {in_dim}"
        )
    rng = rng_from_seed(seed)
    g = rng.standard_normal((out_dim, in_dim)) + 1j * rng.standard_normal(
        (out_dim, in_dim)
    )
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r).copy()
    phases /= np.abs(phases)
    return q * phases[np.newaxis, :]


def random_unitary(dim: int, seed: int) -> np.ndarray:
    """Haar-random unitary of the given dimension."""
    return random_isometry(dim, dim, seed)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hs_norm(op: np.ndarray) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(op))


@dataclass(frozen=True)
class OperatorSchmidtTerm:
    """One term ``weight * left_factor (x) right_factor`` of an operator
    Schmidt decomposition; the factors have unit Hilbert-Schmidt norm."""

    left_factor: np.ndarray
    right_factor: np.ndarray
    weight: float


def operator_schmidt_decompose(op: np.ndarray, split) -> list[OperatorSchmidtTerm]:
    """Operator Schmidt decomposition of ``op`` across ``split = (d1, d2)``.

    Returns terms with non-increasing weights such that
    ``sum_j w_j L_j (x) R_j`` reconstructs ``op`` and
    ``sum_j w_j**2 == ||op||_HS**2``.  Terms with numerically zero weight
    are dropped.
    """
    d1, d2 = split
    op = np.asarray(op, dtype=complex)
    if op.shape != (d1 * d2, d1 * d2):
        raise ShapeError(
            f"operator of shape {op.shape} cannot be split as {d1} x {d2}"
        )
    # Realignment: O[(i1 i2), (j1 j2)] -> M[(i1 j1), (i2 j2)]
    m = op.reshape(d1, d2, d1, d2).transpose(0, 2, 1, 3).reshape(d1 * d1, d2 * d2)
    u, w, vh = np.linalg.svd(m, full_matrices=False)
    terms = []
    cutoff = max(w[0], 1.0) * 1e-14 if w.size else 0.0
    for k in range(w.size):
        if w[k] <= cutoff:
            break
        left = u[:, k].reshape(d1, d1)
        right = vh[k, :].reshape(d2, d2)
        terms.append(OperatorSchmidtTerm(left, right, float(w[k])))
    return terms


def schmidt_reconstruct(terms, split) -> np.ndarray:
    """Rebuild the operator from its Schmidt terms (testing aid)."""
    d1, d2 = split
    out = np.zeros((d1 * d2, d1 * d2), dtype=complex)
    for t in terms:
        out += t.weight * np.kron(t.left_factor, t.right_factor)
    return out


def embed_operator(op: np.ndarray, positions, n_sites: int, d: int) -> np.ndarray:
    """Extend an operator on ``positions`` (sorted site indices) by identity
    to the full ``n_sites`` chain."""
    positions = list(positions)
    if sorted(positions) != positions:
        raise ShapeError("positions must be sorted")
    k = len(positions)
    t = op.reshape([d] * (2 * k))
    full = t
    # Append identity legs for the remaining sites, then permute.
    rest = [x for x in range(n_sites) if x not in positions]
    for _ in rest:
        full = np.tensordot(full, np.eye(d), axes=0)
    # Current leg order: rows(positions), cols(positions), then (row, col)
    # pairs per remaining site.
    row_axes = {}
    col_axes = {}
    for i, x in enumerate(positions):
        row_axes[x] = i
        col_axes[x] = k + i
    for i, x in enumerate(rest):
        row_axes[x] = 2 * k + 2 * i
        col_axes[x] = 2 * k + 2 * i + 1
    perm = [row_axes[x] for x in range(n_sites)] + [col_axes[x] for x in range(n_sites)]
    full = full.transpose(perm)
    return full.reshape(d**n_sites, d**n_sites)


def apply_operator_to_axes(op: np.ndarray, tensor: np.ndarray, axes, d: int) -> np.ndarray:
    """Apply a k-site operator to the given axes of a multi-axis tensor,
    returning a tensor with the same axis order."""
    k = len(axes)
    op_t = op.reshape([d] * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    # tensordot puts the new axes first; move them back into place.
    n = tensor.ndim
    remaining = [ax for ax in range(n) if ax not in axes]
    perm = np.empty(n, dtype=int)
    for i, ax in enumerate(axes):
        perm[ax] = i
    for i, ax in enumerate(remaining):
        perm[ax] = k + i
    return out.transpose(perm)
