"""Function-granular access control engine.

Authorization lives in a three-dimensional access tensor keyed by
(subject, function, object tuple); entries may carry regular-expression
predicates over the invocation.  Atom-structured documents, lattice flow
policies, a guarded command catalog and an auditing reference monitor are
layered on top.
"""

from __future__ import annotations

from .act_core import (
    ENTRY_FALSE,
    ENTRY_TRUE,
    NOT_APPLICABLE,
    AccessTensor,
    Decision,
    EntryKind,
    FunctionSig,
    Invocation,
    Outcome,
    Predicate,
    PredicateKind,
    TensorEntry,
    canonical_serialize,
    match_predicate,
    program_predicate,
    register_program,
    regex_predicate,
    true_with,
)
from .adoc import (
    Atom,
    AtomicDocument,
    AtomLink,
    PolicyLine,
    ValidationReport,
    check_atom_consistency,
    check_atom_consistency_classified,
    link_closure,
    parse,
    serialize,
    text_to_document,
    validate_document,
)
from .guarded import (
    Catalog,
    CopyResult,
    GuardedFunctionSpec,
    OutboxRecord,
    PrintArtifact,
    RenderedView,
    SearchResult,
    compose,
    copy,
    default_catalog,
    force_cc_email,
    redacted_view,
    search,
    search_standard,
    watermark_print,
)
from .lattice import (
    ClassAssignment,
    ClassLattice,
    SecurityClass,
    biba_write_allowed,
    compile_to_tensor,
    flow_allowed,
    load_lattice_policy,
)
from .monitor import (
    AuditLog,
    AuditRecord,
    MonitorService,
    Principal,
    QuestionnaireAnswers,
    defaults_from_questionnaire,
    derive_coauthor_policy,
    load_identities,
    load_workspace,
)
from .policyfile import dump_policy, load_policy
from .projections import (
    application_restricted_function_list,
    authorization_matrix,
    capability_matrix,
    function_list,
    object_list,
    per_function_acm,
    subject_list,
)

__version__ = "0.1.0"
