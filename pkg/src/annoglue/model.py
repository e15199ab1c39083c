"""Annotation domain model.

Annotations carry a typed body, creator identity, metadata, an ordered list of
targets (each anchoring the annotation inside one artefact version with its
own on-canvas placement) and a lifecycle state. All values are immutable;
every operation returns a new value. Nothing in this module touches the file
system; serialization lives in :mod:`annoglue.repository`.

Validation is split two ways: the operations below reject bad input eagerly,
while :func:`validate_annotation` reports rule violations as data for values
that were assembled by hand or read back from disk.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Union

from .errors import (
    AnnotationDisposedError,
    BadFirstStepError,
    BadKeywordError,
    DuplicateTargetError,
    EmptyScenarioError,
    EmptyStepTextError,
    IllegalTransitionError,
    InvalidBodyError,
    InvalidPresentationError,
    LastTargetError,
    NotAVoteError,
    TargetIndexError,
)

# Glyphs a Marker body may use.
MARKER_GLYPHS = frozenset({"warning", "question", "todo", "check", "cross", "info"})

_BUILTIN_ROLES = ("client", "end_user", "designer", "developer")


def utcnow() -> datetime:
    """Current UTC time truncated to whole seconds (the stored precision)."""
    return datetime.now(timezone.utc).replace(microsecond=0)


def new_annotation_id() -> str:
    return uuid.uuid4().hex


def _collapse_role(label: str) -> str:
    return label.lower().replace("-", "").replace("_", "").replace(" ", "")


_BUILTIN_BY_COLLAPSED = {_collapse_role(label): label for label in _BUILTIN_ROLES}


@dataclass(frozen=True, order=True)
class Role:
    """A project role. Spellings of the four built-in roles (EndUser,
    end-user, END_USER, ...) normalize onto the canonical label; everything
    else is a custom role, which therefore can never shadow a built-in."""

    label: str

    def __post_init__(self):
        if not self.label:
            raise ValueError("role label must be non-empty")
        builtin = _BUILTIN_BY_COLLAPSED.get(_collapse_role(self.label))
        if builtin is not None:
            object.__setattr__(self, "label", builtin)

    @property
    def is_builtin(self) -> bool:
        return self.label in _BUILTIN_ROLES


CLIENT = Role("client")
END_USER = Role("end_user")
DESIGNER = Role("designer")
DEVELOPER = Role("developer")


class Motivation(Enum):
    COMMENTING = "commenting"
    DESCRIBING = "describing"
    QUESTIONING = "questioning"
    REPLYING = "replying"
    ASSESSING = "assessing"
    EDITING = "editing"
    BOOKMARKING = "bookmarking"
    TAGGING = "tagging"


class AnnotationFunction(Enum):
    ATTENTIONAL = "attentional"
    ASSOCIATIVE = "associative"
    CONTRIBUTIVE = "contributive"
    DESCRIPTIVE = "descriptive"
    ORGANIZATIONAL = "organizational"


class LifecycleState(Enum):
    OPEN = "open"
    IN_REVIEW = "in_review"
    RESOLVED = "resolved"
    DISPOSED = "disposed"


# Allowed lifecycle edges; everything else (including self-loops and any exit
# from DISPOSED) is illegal.
LIFECYCLE_EDGES = frozenset(
    {
        (LifecycleState.OPEN, LifecycleState.IN_REVIEW),
        (LifecycleState.IN_REVIEW, LifecycleState.OPEN),
        (LifecycleState.IN_REVIEW, LifecycleState.RESOLVED),
        (LifecycleState.RESOLVED, LifecycleState.OPEN),
        (LifecycleState.OPEN, LifecycleState.DISPOSED),
        (LifecycleState.IN_REVIEW, LifecycleState.DISPOSED),
        (LifecycleState.RESOLVED, LifecycleState.DISPOSED),
    }
)


class Choice(Enum):
    AGREE = "agree"
    DISAGREE = "disagree"


class StepKeyword(Enum):
    GIVEN = "Given"
    WHEN = "When"
    THEN = "Then"
    AND = "And"


@dataclass(frozen=True)
class Creator:
    user_id: str
    display_name: str
    roles: frozenset[Role]

    def __post_init__(self):
        object.__setattr__(self, "roles", frozenset(self.roles))


@dataclass(frozen=True)
class Metadata:
    created_at: datetime
    modified_at: datetime
    creator: Creator
    audience: frozenset[Role] = frozenset()
    motivation: Motivation = Motivation.COMMENTING
    purpose: str = ""

    def __post_init__(self):
        object.__setattr__(self, "audience", frozenset(self.audience))


# --- bodies ------------------------------------------------------------------


@dataclass(frozen=True)
class TextBody:
    content: str


@dataclass(frozen=True)
class DrawingBody:
    """Free-hand strokes; each stroke is a polyline of (x, y) canvas points."""

    strokes: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self):
        frozen = tuple(tuple(tuple(point) for point in stroke) for stroke in self.strokes)
        object.__setattr__(self, "strokes", frozen)


@dataclass(frozen=True)
class ImageBody:
    uri: str
    alt: str = ""


@dataclass(frozen=True)
class MarkerBody:
    glyph: str
    label: str = ""


@dataclass(frozen=True)
class VoteBody:
    """Agree/disagree poll. Ballots are keyed by voter user id, so each user
    holds at most one ballot; counters are always derived, never stored."""

    label: str
    ballots: Mapping[str, Choice] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ballots", MappingProxyType(dict(self.ballots)))


@dataclass(frozen=True)
class ScenarioStep:
    keyword: StepKeyword
    text: str


@dataclass(frozen=True)
class ScenarioBody:
    title: str
    steps: tuple[ScenarioStep, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass(frozen=True)
class ExternalFileBody:
    """A labelled link to a file kept outside the annotation itself. Whether
    the link resolves is a consistency-check concern, not an invariant."""

    label: str
    link: str


Body = Union[
    TextBody, DrawingBody, ImageBody, MarkerBody, VoteBody, ScenarioBody, ExternalFileBody
]


# --- selectors and targets ----------------------------------------------------


@dataclass(frozen=True)
class WholeArtefact:
    """The whole file; the default granularity for repository-level targets."""


@dataclass(frozen=True)
class ElementId:
    """A path of element identifiers, outermost first."""

    path: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))


@dataclass(frozen=True)
class Region:
    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class Fragment:
    expression: str
    scheme: str


Selector = Union[WholeArtefact, ElementId, Region, Fragment]


@dataclass(frozen=True)
class Presentation:
    """Placement of the annotation box on the hosting artefact's canvas.
    Target-local: moving an annotation on one artefact never moves it on
    another."""

    x: float
    y: float
    width: float
    height: float


DEFAULT_PRESENTATION = Presentation(0, 0, 160, 40)

#: Pins a target to "whatever the latest version is" instead of a fixed id.
ANY_VERSION = None


@dataclass(frozen=True)
class Target:
    artefact: str
    version: int | None  # ANY_VERSION (None) or a concrete version id
    selector: Selector
    presentation: Presentation

    def triple(self) -> tuple:
        return (self.artefact, self.version, self.selector)


@dataclass(frozen=True)
class Annotation:
    id: str
    body: Body
    function: AnnotationFunction
    metadata: Metadata
    targets: tuple[Target, ...] = ()
    state: LifecycleState = LifecycleState.OPEN

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))


@dataclass(frozen=True)
class Violation:
    """One failed rule, named by location (e.g. ``targets[0].selector``)."""

    location: str
    rule: str

    def __str__(self) -> str:
        return f"{self.location}: {self.rule}"


# --- body helpers ------------------------------------------------------------


def body_text(body: Body) -> str:
    """Textual fallback for any body variant (used for exports, summaries,
    and text search)."""
    if isinstance(body, TextBody):
        return body.content
    if isinstance(body, DrawingBody):
        return f"[drawing: {len(body.strokes)} strokes]"
    if isinstance(body, ImageBody):
        return body.alt or body.uri
    if isinstance(body, MarkerBody):
        return f"{body.glyph}: {body.label}" if body.label else body.glyph
    if isinstance(body, VoteBody):
        return body.label
    if isinstance(body, ScenarioBody):
        return render_scenario(body)
    if isinstance(body, ExternalFileBody):
        return f"{body.label} -> {body.link}" if body.label else body.link
    raise TypeError(f"unknown body variant: {type(body).__name__}")


def body_summary(body: Body, limit: int = 60) -> str:
    text = body_text(body).replace("\n", " ")
    if len(text) <= limit:
        return text
    return text[: limit - 3] + "..."


def _check_body(body: Body, location: str = "body") -> list[Violation]:
    out: list[Violation] = []
    if isinstance(body, TextBody):
        if not body.content:
            out.append(Violation(location, "text content must be non-empty"))
    elif isinstance(body, DrawingBody):
        for i, stroke in enumerate(body.strokes):
            if len(stroke) < 2:
                out.append(Violation(f"{location}.strokes[{i}]", "polyline needs >= 2 points"))
    elif isinstance(body, ImageBody):
        if not body.uri:
            out.append(Violation(location, "image uri must be non-empty"))
    elif isinstance(body, MarkerBody):
        if body.glyph not in MARKER_GLYPHS:
            out.append(
                Violation(
                    location,
                    f"unknown glyph {body.glyph!r}; expected one of "
                    + ", ".join(sorted(MARKER_GLYPHS)),
                )
            )
    elif isinstance(body, VoteBody):
        pass  # map keying enforces one ballot per user
    elif isinstance(body, ScenarioBody):
        if not body.steps:
            out.append(Violation(location, "scenario needs >= 1 step"))
        else:
            if body.steps[0].keyword not in (StepKeyword.GIVEN, StepKeyword.WHEN):
                out.append(Violation(f"{location}.steps[0]", "first step must be Given or When"))
            for i, step in enumerate(body.steps):
                if not step.text.strip():
                    out.append(Violation(f"{location}.steps[{i}]", "step text must be non-empty"))
    elif isinstance(body, ExternalFileBody):
        if not body.link:
            out.append(Violation(location, "external file link must be non-empty"))
    else:
        out.append(Violation(location, f"unknown body variant {type(body).__name__}"))
    return out


def _check_selector(selector: Selector, location: str) -> list[Violation]:
    out: list[Violation] = []
    if isinstance(selector, Region):
        if not selector.w > 0:
            out.append(Violation(location, "w > 0"))
        if not selector.h > 0:
            out.append(Violation(location, "h > 0"))
    elif isinstance(selector, ElementId):
        if not selector.path:
            out.append(Violation(location, "element path must be non-empty"))
        elif any(not part for part in selector.path):
            out.append(Violation(location, "element path segments must be non-empty"))
    elif isinstance(selector, Fragment):
        if not selector.expression:
            out.append(Violation(location, "fragment expression must be non-empty"))
    return out


def _check_presentation(p: Presentation, location: str) -> list[Violation]:
    out: list[Violation] = []
    if not p.width > 0:
        out.append(Violation(location, "width > 0"))
    if not p.height > 0:
        out.append(Violation(location, "height > 0"))
    return out


def validate_annotation(a: Annotation) -> list[Violation]:
    """Check every stated invariant of the annotation and its parts.

    Returns an empty list iff the annotation is valid. Violations are data,
    not exceptions: this runs over values that may have been assembled by
    hand or read back from a repository.
    """
    out: list[Violation] = []
    if not a.id:
        out.append(Violation("id", "annotation id must be non-empty"))
    out.extend(_check_body(a.body))
    if not a.metadata.creator.user_id:
        out.append(Violation("metadata.creator", "user_id must be non-empty"))
    if not a.metadata.creator.roles:
        out.append(Violation("metadata.creator", "roles must be non-empty"))
    if a.metadata.modified_at < a.metadata.created_at:
        out.append(Violation("metadata", "modified_at >= created_at"))
    seen: set[tuple] = set()
    for i, target in enumerate(a.targets):
        if not target.artefact:
            out.append(Violation(f"targets[{i}]", "artefact id must be non-empty"))
        out.extend(_check_selector(target.selector, f"targets[{i}].selector"))
        out.extend(_check_presentation(target.presentation, f"targets[{i}].presentation"))
        triple = target.triple()
        if triple in seen:
            out.append(Violation("targets", "duplicate target triple"))
        seen.add(triple)
    return out


# --- operations ---------------------------------------------------------------


def create_annotation(
    body: Body,
    function: AnnotationFunction,
    creator: Creator,
    motivation: Motivation,
    audience: frozenset[Role] = frozenset(),
    *,
    purpose: str = "",
    now: datetime | None = None,
    annotation_id: str | None = None,
) -> Annotation:
    """Create a fresh Open annotation with no targets yet.

    ``now`` and ``annotation_id`` exist so callers that need reproducible
    output (scripted sessions, replay tests) can pin them; by default the
    current time and a random id are used.
    """
    problems = _check_body(body)
    if problems:
        raise InvalidBodyError("; ".join(str(v) for v in problems))
    stamp = now or utcnow()
    return Annotation(
        id=annotation_id or new_annotation_id(),
        body=body,
        function=function,
        metadata=Metadata(
            created_at=stamp,
            modified_at=stamp,
            creator=creator,
            audience=frozenset(audience),
            motivation=motivation,
            purpose=purpose,
        ),
        targets=(),
        state=LifecycleState.OPEN,
    )


def _touch(a: Annotation, now: datetime | None) -> Metadata:
    return replace(a.metadata, modified_at=now or utcnow())


def attach_target(a: Annotation, t: Target, *, now: datetime | None = None) -> Annotation:
    """Append a target. The body and existing targets are untouched."""
    problems = _check_selector(t.selector, "selector") + _check_presentation(
        t.presentation, "presentation"
    )
    if problems:
        raise InvalidPresentationError("; ".join(str(v) for v in problems))
    if any(existing.triple() == t.triple() for existing in a.targets):
        raise DuplicateTargetError(
            f"target (artefact={t.artefact!r}, version={t.version}, "
            f"selector={type(t.selector).__name__}) already present"
        )
    return replace(a, targets=a.targets + (t,), metadata=_touch(a, now))


def detach_target(
    a: Annotation, index: int, *, persisted: bool = True, now: datetime | None = None
) -> Annotation:
    """Remove the target at ``index``, preserving the order of the rest.

    A persisted annotation must keep at least one target; pass
    ``persisted=False`` for values that were never written to a repository.
    """
    if not 0 <= index < len(a.targets):
        raise TargetIndexError(f"target index {index} out of range 0..{len(a.targets) - 1}")
    if persisted and len(a.targets) == 1:
        raise LastTargetError("cannot remove the only target of a persisted annotation")
    remaining = a.targets[:index] + a.targets[index + 1 :]
    return replace(a, targets=remaining, metadata=_touch(a, now))


def set_target_presentation(
    a: Annotation, index: int, p: Presentation, *, now: datetime | None = None
) -> Annotation:
    """Move/resize one target's annotation box; all other targets keep their
    placement byte-for-byte."""
    if not 0 <= index < len(a.targets):
        raise TargetIndexError(f"target index {index} out of range 0..{len(a.targets) - 1}")
    problems = _check_presentation(p, "presentation")
    if problems:
        raise InvalidPresentationError("; ".join(str(v) for v in problems))
    targets = list(a.targets)
    targets[index] = replace(targets[index], presentation=p)
    return replace(a, targets=tuple(targets), metadata=_touch(a, now))


def cast_vote(
    a: Annotation, voter: Creator, choice: Choice, *, now: datetime | None = None
) -> Annotation:
    """Record (or replace) the voter's ballot. Disposed annotations are
    read-only."""
    if not isinstance(a.body, VoteBody):
        raise NotAVoteError(f"body is {type(a.body).__name__}, not a vote")
    if a.state is LifecycleState.DISPOSED:
        raise AnnotationDisposedError("cannot vote on a disposed annotation")
    ballots = dict(a.body.ballots)
    ballots[voter.user_id] = choice
    return replace(a, body=VoteBody(a.body.label, ballots), metadata=_touch(a, now))


def tally_votes(a: Annotation) -> tuple[int, int]:
    """Derive (agree, disagree) counts from the stored ballots."""
    if not isinstance(a.body, VoteBody):
        raise NotAVoteError(f"body is {type(a.body).__name__}, not a vote")
    agree = sum(1 for c in a.body.ballots.values() if c is Choice.AGREE)
    return agree, len(a.body.ballots) - agree


def transition_state(
    a: Annotation, next_state: LifecycleState, *, now: datetime | None = None
) -> Annotation:
    if (a.state, next_state) not in LIFECYCLE_EDGES:
        raise IllegalTransitionError(a.state, next_state)
    return replace(a, state=next_state, metadata=_touch(a, now))


# --- scenario grammar ----------------------------------------------------------

_KEYWORDS = {kw.value: kw for kw in StepKeyword}


def parse_scenario(raw: str, *, title: str = "") -> ScenarioBody:
    """Parse scenario text, one step per non-blank line: ``<Keyword> <text>``.

    Keywords are case-sensitive (Given/When/Then/And) with a single space
    before the step text; the first step must open with Given or When. Line
    numbers in errors are 1-based over the raw input.
    """
    steps: list[ScenarioStep] = []
    for line_no, line in enumerate(raw.split("\n"), start=1):
        if not line.strip():
            continue
        head, sep, rest = line.partition(" ")
        keyword = _KEYWORDS.get(head)
        if keyword is None:
            raise BadKeywordError(
                f"line {line_no}: {head!r} is not one of Given/When/Then/And", line_no
            )
        if not sep or not rest.strip():
            raise EmptyStepTextError(f"line {line_no}: step text must be non-empty", line_no)
        if not steps and keyword in (StepKeyword.THEN, StepKeyword.AND):
            raise BadFirstStepError(
                f"line {line_no}: first step must be Given or When, got {head}", line_no
            )
        steps.append(ScenarioStep(keyword, rest))
    if not steps:
        raise EmptyScenarioError("scenario has no non-blank lines")
    return ScenarioBody(title=title, steps=tuple(steps))


def render_scenario(body: ScenarioBody) -> str:
    """Canonical text form; parse_scenario(render_scenario(b)) round-trips."""
    return "\n".join(f"{step.keyword.value} {step.text}" for step in body.steps)
