"""Label spaces for both classification tasks.

Two structures live here: the environmental-issue taxonomy (high-level
"integrated" issues, fine-grained "component" issues, and the many-to-many
mapping between them) and the SIC code hierarchy (division, major group,
industry group, industry) with three description styles per label.

Both are immutable after load and safe for concurrent readers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class TaxonomyError(ValueError):
    """Raised for malformed taxonomy data or unknown labels."""


# --------------------------------------------------------------------------
# Environmental issues
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegratedIssue:
    """A high-level issue label with its expert-written description."""

    name: str
    description: str


@dataclass(frozen=True)
class ComponentIssue:
    """A fine-grained issue mapped onto one or more integrated issues."""

    name: str
    parents: frozenset[str]


@dataclass(frozen=True)
class IssueTaxonomy:
    integrated: Mapping[str, IntegratedIssue]
    components: Mapping[str, ComponentIssue]

    def integrated_for(self, component: str) -> frozenset[str]:
        try:
            return self.components[component].parents
        except KeyError:
            raise TaxonomyError(f"unknown component issue: {component!r}") from None

    def to_records(self) -> dict:
        """Serializable form; inverse of load_issue_taxonomy."""
        return {
            "integrated": [
                {"name": i.name, "description": i.description}
                for i in sorted(self.integrated.values(), key=lambda i: i.name)
            ],
            "components": [
                {"name": c.name, "parents": sorted(c.parents)}
                for c in sorted(self.components.values(), key=lambda c: c.name)
            ],
        }


def load_issue_taxonomy(records: Mapping) -> IssueTaxonomy:
    """Build an issue taxonomy from structured rows.

    ``records`` holds an ``integrated`` list of {name, description} rows and
    a ``components`` list of {name, parents} rows. Every parent must name an
    integrated issue; a dangling reference fails the load and names the
    offending component.
    """
    integrated: dict[str, IntegratedIssue] = {}
    for row in records.get("integrated", []):
        name = row["name"]
        description = row.get("description", "")
        if not name:
            raise TaxonomyError("integrated issue with empty name")
        if not description:
            raise TaxonomyError(f"integrated issue {name!r} has an empty description")
        if name in integrated:
            raise TaxonomyError(f"duplicate integrated issue: {name!r}")
        integrated[name] = IntegratedIssue(name=name, description=description)

    components: dict[str, ComponentIssue] = {}
    for row in records.get("components", []):
        name = row["name"]
        parents = frozenset(row.get("parents", []))
        if not parents:
            raise TaxonomyError(f"component issue {name!r} has no parents")
        missing = sorted(p for p in parents if p not in integrated)
        if missing:
            raise TaxonomyError(
                f"component issue {name!r} references unknown integrated issue(s): {missing}"
            )
        if name in components:
            raise TaxonomyError(f"duplicate component issue: {name!r}")
        components[name] = ComponentIssue(name=name, parents=parents)

    return IssueTaxonomy(integrated=integrated, components=components)


def load_issue_taxonomy_file(path: str | Path) -> IssueTaxonomy:
    with open(path, "r", encoding="utf-8") as fh:
        return load_issue_taxonomy(json.load(fh))


def integrated_labels_for(components: Iterable[str], tax: IssueTaxonomy) -> set[str]:
    """Union of the integrated parents of the given component issues."""
    labels: set[str] = set()
    for name in components:
        labels |= tax.integrated_for(name)
    return labels


def select_top_issues(org_labels: Mapping[str, set[str]], k: int) -> list[str]:
    """The k integrated issues associated with the most organizations.

    Ordered by descending organization count; ties broken by issue name so
    the resulting label space is reproducible.
    """
    counts: dict[str, int] = {}
    for labels in org_labels.values():
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
    if k > len(counts):
        raise TaxonomyError(f"asked for top {k} issues but only {len(counts)} are present")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [name for name, _ in ranked[:k]]


# --------------------------------------------------------------------------
# SIC hierarchy
# --------------------------------------------------------------------------

LEVEL_DIVISION = "division"
LEVEL_MAJOR_GROUP = "major_group"
LEVEL_INDUSTRY_GROUP = "industry_group"
LEVEL_INDUSTRY = "industry"

_CODE_LEN_BY_LEVEL = {LEVEL_MAJOR_GROUP: 2, LEVEL_INDUSTRY_GROUP: 3, LEVEL_INDUSTRY: 4}


@dataclass
class SICNode:
    """One node of the SIC tree. Divisions are keyed by a 2-digit range
    (e.g. "01-09"); every other level is a digit string whose code extends
    its parent by exactly one digit."""

    code: str
    level: str
    title: str
    long_text: str = ""
    children: list["SICNode"] = field(default_factory=list)


@dataclass(frozen=True)
class SICHierarchy:
    roots: list[SICNode]
    _by_code: Mapping[str, SICNode]

    def lookup(self, code: str) -> SICNode:
        try:
            return self._by_code[code]
        except KeyError:
            raise TaxonomyError(f"unknown SIC code: {code!r}") from None

    def __contains__(self, code: str) -> bool:
        return code in self._by_code

    def division_for(self, major_group: str) -> SICNode:
        value = int(major_group)
        for root in self.roots:
            lo, hi = _parse_range(root.code)
            if lo <= value <= hi:
                return root
        raise TaxonomyError(f"no division covers major group {major_group!r}")

    def to_records(self) -> list[dict]:
        rows = []

        def visit(node: SICNode) -> None:
            rows.append(
                {"code": node.code, "level": node.level, "title": node.title, "long_text": node.long_text}
            )
            for child in node.children:
                visit(child)

        for root in self.roots:
            visit(root)
        return rows


def _parse_range(code: str) -> tuple[int, int]:
    if "-" in code:
        lo, hi = code.split("-", 1)
    else:
        lo = hi = code
    if not (lo.isdigit() and hi.isdigit() and len(lo) == 2 and len(hi) == 2):
        raise TaxonomyError(f"bad division range: {code!r}")
    return int(lo), int(hi)


def load_sic_hierarchy(records: Sequence[Mapping]) -> SICHierarchy:
    """Assemble the SIC tree from a flat node list.

    Parentage is inferred from code prefixes: a 3-digit code hangs under its
    2-digit prefix, a 4-digit code under its 3-digit prefix, and 2-digit
    major groups under the division whose range covers them. A node whose
    parent prefix is absent fails the load.
    """
    divisions: list[SICNode] = []
    by_code: dict[str, SICNode] = {}
    coded: list[SICNode] = []

    for row in records:
        code, level, title = row["code"], row["level"], row["title"]
        if not title:
            raise TaxonomyError(f"SIC node {code!r} has an empty title")
        node = SICNode(code=code, level=level, title=title, long_text=row.get("long_text", "") or "")
        if level == LEVEL_DIVISION:
            _parse_range(code)
            divisions.append(node)
        else:
            expected = _CODE_LEN_BY_LEVEL.get(level)
            if expected is None:
                raise TaxonomyError(f"unknown SIC level {level!r} for code {code!r}")
            if not (code.isdigit() and len(code) == expected):
                raise TaxonomyError(f"SIC code {code!r} is not {expected} digits for level {level}")
            if code in by_code:
                raise TaxonomyError(f"duplicate SIC code: {code!r}")
            by_code[code] = node
            coded.append(node)

    divisions.sort(key=lambda n: _parse_range(n.code))
    hierarchy = SICHierarchy(roots=divisions, _by_code=by_code)

    for node in sorted(coded, key=lambda n: n.code):
        if node.level == LEVEL_MAJOR_GROUP:
            parent = hierarchy.division_for(node.code)
        else:
            prefix = node.code[:-1]
            parent = by_code.get(prefix)
            if parent is None:
                raise TaxonomyError(f"orphan SIC code {node.code!r}: no parent {prefix!r}")
        parent.children.append(node)

    return hierarchy


def load_sic_hierarchy_file(path: str | Path) -> SICHierarchy:
    with open(path, "r", encoding="utf-8") as fh:
        return load_sic_hierarchy(json.load(fh))


def code_prefix(code: str, k: int) -> str:
    """First k digits of a 4-digit SIC code, leading zeros preserved."""
    if not (isinstance(code, str) and len(code) == 4 and code.isdigit()):
        raise TaxonomyError(f"not a 4-digit SIC code: {code!r}")
    if not 1 <= k <= 4:
        raise TaxonomyError(f"prefix length must be 1..4, got {k}")
    return code[:k]


# --------------------------------------------------------------------------
# Label descriptions
# --------------------------------------------------------------------------

class DescriptionStyle(str, Enum):
    SHORT = "short"
    TREE = "tree"
    LONG = "long"


@dataclass(frozen=True)
class LabelDescription:
    label: str
    style: DescriptionStyle
    text: str


def _subtree_titles(node: SICNode) -> list[str]:
    """Titles of the node and its whole subtree, depth-first by ascending code."""
    titles = [node.title]
    for child in sorted(node.children, key=lambda n: n.code):
        titles.extend(_subtree_titles(child))
    return titles


def label_description(
    label: str,
    style: DescriptionStyle | str,
    source: IssueTaxonomy | SICHierarchy,
) -> LabelDescription:
    """Render the description text for one label.

    Short is the label's own title (or issue name). Tree concatenates the
    title with the titles of everything in the label's subtree, "; " joined;
    for issues the subtree is the set of component issues mapped to it. Long
    is the manual prose for SIC codes and the expert-written description for
    issues; asking for Long where none exists is an error naming the label.
    """
    style = DescriptionStyle(style)
    if isinstance(source, SICHierarchy):
        node = source.lookup(label)
        if style is DescriptionStyle.SHORT:
            text = node.title
        elif style is DescriptionStyle.TREE:
            text = "; ".join(_subtree_titles(node))
        else:
            if not node.long_text:
                raise TaxonomyError(f"no long description available for SIC code {label!r}")
            text = node.long_text
    else:
        issue = source.integrated.get(label)
        if issue is None:
            raise TaxonomyError(f"unknown integrated issue: {label!r}")
        if style is DescriptionStyle.SHORT:
            text = issue.name
        elif style is DescriptionStyle.TREE:
            children = sorted(
                c.name for c in source.components.values() if label in c.parents
            )
            text = "; ".join([issue.name] + children)
        else:
            text = issue.description
    return LabelDescription(label=label, style=style, text=text)


def descriptions_for(
    labels: Sequence[str],
    style: DescriptionStyle | str,
    source: IssueTaxonomy | SICHierarchy,
) -> list[LabelDescription]:
    """Descriptions for an ordered label list, in that order."""
    return [label_description(label, style, source) for label in labels]
