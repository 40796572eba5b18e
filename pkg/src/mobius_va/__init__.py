"""Truncated Moebius vertex algebras and their smeared (Wightman) counterparts."""

from .circle import (
    LieElement,
    MoebiusElement,
    TestFunction,
    alpha_automorphism,
    beta_action,
    exp_lie,
    from_samples,
    log_moebius,
    reflect_transform,
    sobolev_norm,
)
from .errors import BranchCutError, DegenerateFieldError, FitError, TruncationError
from .forms import (
    GramTower,
    Involution,
    build_invariant_form,
    extend_form_to_smeared,
    invariance_check,
    involutive_structure_check,
    opposite_tower,
    quotient_model,
    radical,
)
from .graded import BlockOperator, Covector, GradedSpace, GradedVector, apply, project_weight
from .vertex import (
    Field,
    Model,
    ModeTower,
    borcherds_commutator,
    borcherds_consistency,
    borcherds_product,
    build_heisenberg,
    build_virasoro,
    field_from_state,
    identity_field,
    locality_order_check,
    mobius_axiom_check,
)
from .wightman import (
    correlator,
    covariance_check,
    infinitesimal_covariance_check,
    order_estimate,
    reconstruct_model,
    reeh_schlieder_rank,
    roundtrip_check,
    smear,
    u_of_gamma,
)

__version__ = "0.1.0"
