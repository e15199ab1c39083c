"""Independent brute-force consistency checker.

Deliberately written from the rules themselves (plain loops, direct hashlib
digests, no shared helpers with the implementation) so agreement between the
two is evidence, not tautology. Findings are compared as multisets of
(severity, kind, annotation id, target index).
"""

from __future__ import annotations

import hashlib
from collections import Counter

from annoglue.model import ElementId, ExternalFileBody


def oracle_findings(p) -> Counter:
    artefacts = {a.id: a for a in p.index.artefacts}
    known_annotation_ids = {a.id for s in p.sets for a in s.annotations}
    out = []

    for set_file in p.sets:
        for annotation in set_file.annotations:
            body = annotation.body
            if isinstance(body, ExternalFileBody):
                link = body.link
                if "://" not in link and not link.startswith("/"):
                    if not (p.root / link).is_file():
                        out.append(("error", "BrokenExternalFile", annotation.id, None))

            for index, target in enumerate(annotation.targets):
                artefact = artefacts.get(target.artefact)
                if artefact is None:
                    out.append(("error", "DanglingArtefact", annotation.id, index))
                    continue

                newest = None
                for version in artefact.versions:
                    if newest is None or version.version_id > newest.version_id:
                        newest = version

                if target.version is None:
                    resolved = newest
                else:
                    resolved = None
                    for version in artefact.versions:
                        if version.version_id == target.version:
                            resolved = version
                    if resolved is None:
                        out.append(("error", "DanglingVersion", annotation.id, index))
                        continue
                    if resolved.version_id != newest.version_id:
                        out.append(("warning", "StaleTarget", annotation.id, index))

                full = p.root / resolved.path
                if not full.is_file():
                    out.append(("warning", "DigestMismatch", annotation.id, index))
                else:
                    digest = hashlib.sha256(full.read_bytes()).hexdigest()
                    if digest != resolved.content_digest:
                        out.append(("warning", "DigestMismatch", annotation.id, index))

                if artefact.kind.value == "annotation_set" and isinstance(
                    target.selector, ElementId
                ):
                    first = target.selector.path[0] if target.selector.path else ""
                    if first not in known_annotation_ids:
                        out.append(("error", "OrphanAnnotationTarget", annotation.id, index))

    return Counter(out)


def finding_keys(findings) -> Counter:
    """Project the implementation's findings onto the oracle's tuple space."""
    return Counter((f.severity, f.kind, f.annotation, f.target_index) for f in findings)
