"""annoglue: typed, multi-target, lifecycle-managed annotations over a
file-based design-artefact repository, with cross-artefact import,
consistency checking, graph export and W3C Web Annotation interop."""

from .artefacts import (
    Artefact,
    ArtefactKind,
    ArtefactVersion,
    EditorBinding,
    VersionStatus,
    add_version,
    latest_version,
    register_artefact,
    resolve_ref,
    set_version_status,
)
from .graph import AnnotationGraph, build_graph, export_dot, export_graph_json
from .linker import (
    ConsistencyFinding,
    annotate_annotation,
    check_consistency,
    import_into_artefact,
)
from .model import (
    ANY_VERSION,
    Annotation,
    AnnotationFunction,
    Choice,
    Creator,
    DrawingBody,
    ElementId,
    ExternalFileBody,
    Fragment,
    ImageBody,
    LifecycleState,
    MarkerBody,
    Metadata,
    Motivation,
    Presentation,
    Region,
    Role,
    ScenarioBody,
    ScenarioStep,
    Target,
    TextBody,
    Violation,
    VoteBody,
    WholeArtefact,
    attach_target,
    cast_vote,
    create_annotation,
    detach_target,
    parse_scenario,
    render_scenario,
    set_target_presentation,
    tally_votes,
    transition_state,
    validate_annotation,
)
from .repository import (
    AnnotationSetFile,
    Project,
    ProjectIndex,
    init_project,
    load_project,
    persist_annotation_set,
    rebuild_index,
    save_project,
)
from .w3c import export_w3c, import_w3c

__version__ = "0.1.0"
