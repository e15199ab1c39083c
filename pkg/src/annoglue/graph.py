"""Project-wide annotation graph and its DOT / JSON exports.

Nodes are annotations and artefacts; every target becomes one edge, labelled
with its selector kind and the pinned version (or "any"). Annotation-on-
annotation targets point at the annotation node itself rather than the set
file that stores it. Disposed annotations are hidden unless asked for.

Both exporters are pure functions of the graph value and byte-stable, so two
builds of an unchanged project compare equal at the byte level; rendering the
DOT (Graphviz or otherwise) is deliberately left to external tools.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .artefacts import ArtefactKind, latest_version
from .canonical import canonical_dumps
from .model import (
    Annotation,
    ElementId,
    Fragment,
    LifecycleState,
    Region,
    WholeArtefact,
    body_summary,
)
from .repository import Project, all_annotations


@dataclass(frozen=True)
class AnnotationNode:
    id: str  # "ann:<annotation id>"
    annotation: str
    function: str
    state: str
    summary: str


@dataclass(frozen=True)
class ArtefactNode:
    id: str  # "art:<artefact id>"
    artefact: str
    name: str
    kind: str
    latest_version: int | None


@dataclass(frozen=True)
class GraphEdge:
    source: str
    dest: str
    selector: str
    version: str  # "any" or the version id as text


@dataclass(frozen=True)
class AnnotationGraph:
    nodes: tuple
    edges: tuple[GraphEdge, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))


def annotation_node_id(annotation_id: str) -> str:
    return f"ann:{annotation_id}"


def artefact_node_id(artefact_id: str) -> str:
    return f"art:{artefact_id}"


def _selector_kind(selector) -> str:
    if isinstance(selector, WholeArtefact):
        return "whole"
    if isinstance(selector, ElementId):
        return "element_id"
    if isinstance(selector, Region):
        return "region"
    if isinstance(selector, Fragment):
        return "fragment"
    return "unknown"


def build_graph(p: Project, *, include_disposed: bool = False) -> AnnotationGraph:
    """Derive the annotation graph from a loaded project.

    Every registered artefact gets a node; artefact ids referenced only by
    dangling targets get a placeholder node so the edge set stays closed.
    """
    included: dict[str, Annotation] = {}
    for _, annotation in all_annotations(p):
        if annotation.state is LifecycleState.DISPOSED and not include_disposed:
            continue
        included[annotation.id] = annotation

    artefact_by_id = {a.id: a for a in p.index.artefacts}
    set_artefact_ids = {
        a.id for a in p.index.artefacts if a.kind is ArtefactKind.ANNOTATION_SET
    }

    annotation_nodes = [
        AnnotationNode(
            id=annotation_node_id(a.id),
            annotation=a.id,
            function=a.function.value,
            state=a.state.value,
            summary=body_summary(a.body),
        )
        for a in sorted(included.values(), key=lambda a: a.id)
    ]

    artefact_ids = set(artefact_by_id)
    edges: list[GraphEdge] = []
    for annotation in sorted(included.values(), key=lambda a: a.id):
        for target in annotation.targets:
            dest = artefact_node_id(target.artefact)
            if target.artefact in set_artefact_ids and isinstance(target.selector, ElementId):
                referenced = target.selector.path[0] if target.selector.path else ""
                if referenced in included:
                    dest = annotation_node_id(referenced)
            if dest.startswith("art:"):
                artefact_ids.add(target.artefact)
            edges.append(
                GraphEdge(
                    source=annotation_node_id(annotation.id),
                    dest=dest,
                    selector=_selector_kind(target.selector),
                    version="any" if target.version is None else str(target.version),
                )
            )

    artefact_nodes = []
    for artefact_id in sorted(artefact_ids):
        artefact = artefact_by_id.get(artefact_id)
        if artefact is None:  # dangling reference: keep the graph closed
            artefact_nodes.append(
                ArtefactNode(
                    id=artefact_node_id(artefact_id),
                    artefact=artefact_id,
                    name=artefact_id,
                    kind="unknown",
                    latest_version=None,
                )
            )
        else:
            artefact_nodes.append(
                ArtefactNode(
                    id=artefact_node_id(artefact.id),
                    artefact=artefact.id,
                    name=artefact.name,
                    kind=artefact.kind.value,
                    latest_version=latest_version(artefact).version_id,
                )
            )

    graph = AnnotationGraph(nodes=tuple(annotation_nodes + artefact_nodes), edges=tuple(edges))
    node_ids = {node.id for node in graph.nodes}
    assert len(node_ids) == len(graph.nodes), "duplicate node ids"
    for edge in graph.edges:
        assert edge.source in node_ids and edge.dest in node_ids, "edge endpoint missing"
    return graph


# --- exports ---------------------------------------------------------------------


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(g: AnnotationGraph) -> str:
    """Byte-stable DOT digraph: annotation nodes are yellow notes, artefact
    nodes boxes."""
    lines = ["digraph annotations {"]
    for node in g.nodes:
        if isinstance(node, AnnotationNode):
            label = f"{node.summary}\\n[{node.function}/{node.state}]"
            lines.append(
                f"  {_dot_quote(node.id)} [label={_dot_quote(label)} "
                "shape=note style=filled fillcolor=yellow];"
            )
        else:
            suffix = f" v{node.latest_version}" if node.latest_version is not None else ""
            label = f"{node.name}{suffix}"
            lines.append(f"  {_dot_quote(node.id)} [label={_dot_quote(label)} shape=box];")
    for edge in g.edges:
        label = f"{edge.selector}/{edge.version}"
        lines.append(
            f"  {_dot_quote(edge.source)} -> {_dot_quote(edge.dest)} "
            f"[label={_dot_quote(label)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph_json(g: AnnotationGraph) -> str:
    """Canonical JSON in graph order; :func:`parse_graph_json` inverts it."""
    nodes = []
    for node in g.nodes:
        if isinstance(node, AnnotationNode):
            nodes.append(
                {
                    "type": "annotation",
                    "id": node.id,
                    "annotation": node.annotation,
                    "function": node.function,
                    "state": node.state,
                    "summary": node.summary,
                }
            )
        else:
            nodes.append(
                {
                    "type": "artefact",
                    "id": node.id,
                    "artefact": node.artefact,
                    "name": node.name,
                    "kind": node.kind,
                    "latest_version": node.latest_version,
                }
            )
    edges = [
        {"from": e.source, "to": e.dest, "selector": e.selector, "version": e.version}
        for e in g.edges
    ]
    return canonical_dumps({"nodes": nodes, "edges": edges})


def parse_graph_json(text: str) -> AnnotationGraph:
    data = json.loads(text)
    nodes = []
    for raw in data["nodes"]:
        if raw["type"] == "annotation":
            nodes.append(
                AnnotationNode(
                    id=raw["id"],
                    annotation=raw["annotation"],
                    function=raw["function"],
                    state=raw["state"],
                    summary=raw["summary"],
                )
            )
        else:
            nodes.append(
                ArtefactNode(
                    id=raw["id"],
                    artefact=raw["artefact"],
                    name=raw["name"],
                    kind=raw["kind"],
                    latest_version=raw["latest_version"],
                )
            )
    edges = tuple(
        GraphEdge(source=raw["from"], dest=raw["to"], selector=raw["selector"], version=raw["version"])
        for raw in data["edges"]
    )
    return AnnotationGraph(nodes=tuple(nodes), edges=edges)
