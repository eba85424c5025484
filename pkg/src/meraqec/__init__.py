"""Scale-invariant MERA networks as approximate quantum error correcting
codes: construction, renormalization spectra, correctability bounds, and
operator-spreading dynamics."""

from .channels import build_transfer_operator, spectral_decomposition
from .network import MeraNetwork, Region, build_mera, random_mera, trivial_mera
from .qec import (
    CodeSpec,
    decoupling_defect,
    distance_exponent,
    petz_recovery,
    recovery_error,
    uberholography_partition,
    union_correctability,
    verify_decoupling_bound,
    verify_local_correctability,
    verify_simply_connected_correctability,
)

__all__ = [
    "MeraNetwork",
    "Region",
    "build_mera",
    "random_mera",
    "trivial_mera",
    "build_transfer_operator",
    "spectral_decomposition",
    "CodeSpec",
    "decoupling_defect",
    "distance_exponent",
    "petz_recovery",
    "recovery_error",
    "uberholography_partition",
    "union_correctability",
    "verify_decoupling_bound",
    "verify_local_correctability",
    "verify_simply_connected_correctability",
]

__version__ = "0.1.0"
