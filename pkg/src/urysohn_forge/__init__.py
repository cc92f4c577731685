"""Finite fragments of Urysohn-type metric spaces, executable at desk scale:
Katetov extensions, EPPA witness search through free-group globalization and
finite coset quotients, group-averaged embeddings, and uniform-convexity
obstruction certificates.
"""

from .spaces import (
    DistanceValueSet,
    EmbeddingEnvelope,
    FiniteMetricSpace,
    PartialIsometry,
    PermutationGroup,
    SpaceError,
    ValidationReport,
    build_space,
    check_almost_transitive,
    compute_isometry_group,
    empirical_envelopes,
    enumerate_partial_isometries,
    extract_epsilon_net,
    load_space,
    save_space,
    validate_space,
)
from .katetov import (
    KatetovFunction,
    SphereWitness,
    build_sphere_witness,
    controlled_extension,
    enumerate_katetov,
    grow_fragment,
    kuratowski_embed,
    lift_action,
    one_point_extension,
    realize_T_epsilon,
    validate_katetov,
)
from .globalization import (
    Alphabet,
    BadConfiguration,
    LabeledCosetGraph,
    LeftEquation,
    LeftSystem,
    QuotientAction,
    build_coset_graph,
    build_truncated_globalization,
    check_quotient,
    detect_bad_configuration,
    emit_subgroup_data,
    eval_partial_action,
    reduce_word,
    solve_left_system,
)
from .eppa import (
    EppaWitness,
    SearchBudget,
    Tower,
    brute_force_witness,
    build_tower,
    graph_eppa,
    search_witness_quotient,
    verify_witness,
    witness_from_action,
)
from .probes import (
    AveragedEmbedding,
    NEpsTree,
    TreeCertificate,
    average_map,
    check_metric_transform,
    convexity_probe,
    hull_separation,
    modulus_convexity,
    modulus_smoothness,
    support_functional,
    tree_from_nested_sets,
    validate_tree,
)

__version__ = "0.1.0"
