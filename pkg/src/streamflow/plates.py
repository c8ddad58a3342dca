"""Meta-data trees and plates.

A plate loops a part of the workflow graph over the identifiers found
under one meta-data tag.  Nested plates loop over the children of each
parent-plate identifier, so expansion follows the tree rather than taking a
free cartesian product.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .errors import CycleDetected, UnknownPlate, UnknownTag
from .stream import check_meta_token, make_stream_id

Path = tuple  # ((tag, identifier), ...) from the root


class MetaDataTree:
    """Rooted tree of (tag, identifier) nodes.

    Tags may be declared before any identifier exists under them, which is
    how plates filled at runtime (e.g. by a splitter) start out empty.
    """

    def __init__(self):
        self._children = {(): {}}
        self._tags = set()

    def __eq__(self, other):
        if not isinstance(other, MetaDataTree):
            return NotImplemented
        return self.to_value() == other.to_value() and self._tags == other._tags

    def __repr__(self):
        return f"MetaDataTree({self.to_value()!r})"

    @property
    def tags(self) -> frozenset:
        return frozenset(self._tags)

    def declare_tag(self, tag: str) -> None:
        self._tags.add(check_meta_token(tag, "key"))

    def add(self, tag: str, identifier: str, parent: Path = ()) -> Path:
        """Insert ``identifier`` under ``parent``; returns the new node's path."""
        parent = tuple(tuple(p) for p in parent)
        if parent not in self._children:
            raise KeyError(f"no meta-data node {parent!r}")
        check_meta_token(tag, "key")
        check_meta_token(identifier, "value")
        self._tags.add(tag)
        self._children[parent].setdefault(tag, set()).add(identifier)
        path = parent + ((tag, identifier),)
        self._children.setdefault(path, {})
        return path

    def add_path(self, path: Iterable) -> Path:
        node = ()
        for tag, identifier in path:
            node = self.add(tag, identifier, node)
        return node

    def has(self, path: Path) -> bool:
        return tuple(tuple(p) for p in path) in self._children

    def identifiers(self, parent: Path, tag: str) -> list:
        return sorted(self._children.get(parent, {}).get(tag, ()))

    def nodes(self) -> list:
        """Every non-root node path, sorted."""
        return sorted(p for p in self._children if p)

    def nodes_with_tag(self, tag: str) -> list:
        return [p for p in self.nodes() if p[-1][0] == tag]

    def copy(self) -> "MetaDataTree":
        other = MetaDataTree()
        other.merge(self)
        return other

    def merge(self, other: "MetaDataTree") -> None:
        for tag in other._tags:
            self.declare_tag(tag)
        for path in other.nodes():
            self.add_path(path)

    def to_value(self) -> dict:
        """Nested ``{tag: {identifier: subtree}}`` form used in definition files."""

        def build(path):
            return {
                tag: {ident: build(path + ((tag, ident),)) for ident in sorted(ids)}
                for tag, ids in sorted(self._children[path].items())
            }

        value = build(())
        used = {tag for children in self._children.values() for tag in children}
        for tag in sorted(self._tags - used):
            value.setdefault(tag, {})
        return value

    @classmethod
    def from_value(cls, value: Mapping) -> "MetaDataTree":
        tree = cls()

        def walk(subtree, path):
            for tag, ids in subtree.items():
                tree.declare_tag(tag)
                for ident, children in ids.items():
                    walk(children, tree.add(tag, ident, path))

        walk(value, ())
        return tree


@dataclass(frozen=True)
class PlateDefinition:
    plate_id: str
    meta_data_key: str
    parent_plate: Optional[str] = None
    values_filter: Optional[tuple] = None

    def to_value(self) -> dict:
        return {
            "id": self.plate_id,
            "meta_data_key": self.meta_data_key,
            "parent": self.parent_plate,
            "values": list(self.values_filter) if self.values_filter is not None else None,
        }

    @classmethod
    def from_value(cls, value) -> "PlateDefinition":
        values = value.get("values")
        return cls(value["id"], value["meta_data_key"], value.get("parent"),
                   tuple(values) if values is not None else None)


def plate_chain(plate: PlateDefinition, plates: Optional[Mapping] = None) -> list:
    """Plates from the outermost ancestor down to ``plate``."""
    plates = plates or {}
    chain = [plate]
    seen = {plate.plate_id}
    while chain[0].parent_plate is not None:
        pid = chain[0].parent_plate
        if pid in seen:
            raise CycleDetected(seen)
        try:
            chain.insert(0, plates[pid])
        except KeyError:
            raise UnknownPlate(f"unknown plate {pid!r}") from None
        seen.add(pid)
    return chain


def meta_sort_key(assignment) -> str:
    return "".join(f"({k}={v})" for k, v in assignment)


def expand(plate: PlateDefinition, tree: MetaDataTree, plates: Optional[Mapping] = None) -> list:
    """Every assignment of the plate chain's keys found in the tree.

    Each result is a sorted tuple of (key, identifier) pairs; the list is
    ordered by canonical form ``(key=value)...``.
    """
    if plates is not None and plate.plate_id not in plates:
        raise UnknownPlate(f"unknown plate {plate.plate_id!r}")
    paths = [()]
    for p in plate_chain(plate, plates):
        if p.meta_data_key not in tree.tags:
            raise UnknownTag(f"meta-data tag {p.meta_data_key!r} not in tree")
        allowed = set(p.values_filter) if p.values_filter is not None else None
        paths = [
            path + ((p.meta_data_key, ident),)
            for path in paths
            for ident in tree.identifiers(path, p.meta_data_key)
            if allowed is None or ident in allowed
        ]
    values = {tuple(sorted(path)) for path in paths}
    return sorted(values, key=meta_sort_key)


def streams_for_node(node_name: str, plate: Optional[PlateDefinition], tree: MetaDataTree,
                     plates: Optional[Mapping] = None) -> list:
    if plate is None:
        return [make_stream_id(node_name)]
    return [make_stream_id(node_name, value) for value in expand(plate, tree, plates)]
