"""Configuration documents: centre.xml, GridMapping.xml and GridList.xml.

Each document has an immutable in-memory model plus a loader/saver pair.
Identifier comparisons are case-insensitive; original case is kept for output.
"""
from __future__ import annotations

import os
import re
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import MappingInvalid, RegistryInvalid, SchemaInvalid, XmlMalformed

DATATYPES = ("string", "int", "float", "bool", "date")
BACKEND_KINDS = ("embedded", "external")
XML_PROLOG = '<?xml version="1.0" encoding="UTF-8"?>\n'

# Lines like "- <table ...>" come from browser tree views of XML and are
# what documents copied out of such a view look like.
_TREE_MARKER = re.compile(r"^(\s*)-\s+(?=<)", re.MULTILINE)


def _fold(name: str) -> str:
    return name.casefold()


def _is_identifier(name) -> bool:
    return isinstance(name, str) and bool(name) and not any(c.isspace() for c in name)


# ---------------------------------------------------------------------------
# centre.xml
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnDef:
    name: str
    datatype: str = "string"
    description: str = ""

    def __post_init__(self):
        if not _is_identifier(self.name):
            raise SchemaInvalid(f"invalid column name {self.name!r}")
        if self.datatype not in DATATYPES:
            raise SchemaInvalid(
                f"column {self.name!r}: unknown datatype {self.datatype!r}"
            )


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]
    description: str = ""

    def __post_init__(self):
        if not _is_identifier(self.name):
            raise SchemaInvalid(f"invalid table name {self.name!r}")
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise SchemaInvalid(f"table {self.name!r} has no columns")
        seen = set()
        for col in self.columns:
            key = _fold(col.name)
            if key in seen:
                raise SchemaInvalid(f"table {self.name!r}: duplicate column {col.name!r}")
            seen.add(key)

    def column(self, name: str) -> Optional[ColumnDef]:
        key = _fold(name)
        for col in self.columns:
            if _fold(col.name) == key:
                return col
        return None


@dataclass(frozen=True)
class VirtualSchema:
    tables: tuple[TableDef, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        seen = set()
        for t in self.tables:
            if _fold(t.name) in seen:
                raise SchemaInvalid(f"duplicate table {t.name!r}")
            seen.add(_fold(t.name))

    def table(self, name: str) -> Optional[TableDef]:
        key = _fold(name)
        for t in self.tables:
            if _fold(t.name) == key:
                return t
        return None


# ---------------------------------------------------------------------------
# GridMapping.xml
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnMap:
    center_column: str
    grid_column: str

    def __post_init__(self):
        if not self.center_column or not self.grid_column:
            raise MappingInvalid("column map entries need both names")


@dataclass(frozen=True)
class TableMap:
    center_table: str
    grid_table: str
    columns: tuple[ColumnMap, ...] = ()

    def __post_init__(self):
        if not self.center_table or not self.grid_table:
            raise MappingInvalid("table map entries need both names")
        object.__setattr__(self, "columns", tuple(self.columns))
        seen = set()
        for cm in self.columns:
            if _fold(cm.center_column) in seen:
                raise MappingInvalid(
                    f"table {self.center_table!r}: column {cm.center_column!r} mapped twice"
                )
            seen.add(_fold(cm.center_column))

    def column(self, center_column: str) -> Optional[ColumnMap]:
        key = _fold(center_column)
        for cm in self.columns:
            if _fold(cm.center_column) == key:
                return cm
        return None


@dataclass(frozen=True)
class MemberMapping:
    """One member's center-to-local name mapping.

    ``backend_kind`` is ``None`` when the document carries no ``kind``
    attribute; :attr:`kind` gives the effective value.
    """

    connection_string: str
    tables: tuple[TableMap, ...]
    port: int
    backend_kind: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        if self.backend_kind is not None and self.backend_kind not in BACKEND_KINDS:
            raise MappingInvalid(f"unknown backend kind {self.backend_kind!r}")
        if isinstance(self.port, bool) or not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise MappingInvalid(f"port {self.port!r} out of range")
        seen = set()
        for tm in self.tables:
            if _fold(tm.center_table) in seen:
                raise MappingInvalid(f"center table {tm.center_table!r} mapped twice")
            seen.add(_fold(tm.center_table))

    @property
    def kind(self) -> str:
        return self.backend_kind or "embedded"

    def table(self, center_table: str) -> Optional[TableMap]:
        key = _fold(center_table)
        for tm in self.tables:
            if _fold(tm.center_table) == key:
                return tm
        return None


# ---------------------------------------------------------------------------
# GridList.xml
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridMember:
    name: str
    address: str
    port: int

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise RegistryInvalid("member name must be non-empty")
        if isinstance(self.port, bool) or not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise RegistryInvalid(f"member {self.name!r}: port {self.port!r} out of range")

    @property
    def endpoint(self) -> tuple[str, int]:
        return (self.address, self.port)


@dataclass(frozen=True)
class GridRegistry:
    members: tuple[GridMember, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        names = [m.name for m in self.members]
        if len(set(names)) != len(names):
            raise RegistryInvalid("duplicate member names")

    def get(self, name: str) -> Optional[GridMember]:
        for m in self.members:
            if m.name == name:
                return m
        return None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

class IssueKind(str, Enum):
    UNKNOWN_CENTER_TABLE = "UnknownCenterTable"
    UNKNOWN_CENTER_COLUMN = "UnknownCenterColumn"


@dataclass(frozen=True)
class Issue:
    kind: IssueKind
    subject: str

    def __str__(self):
        return f"{self.kind.value}: {self.subject}"


def validate_mapping(mapping: MemberMapping, schema: VirtualSchema) -> list[Issue]:
    """List every center table/column named by ``mapping`` but absent from ``schema``."""
    issues = []
    for tm in mapping.tables:
        table = schema.table(tm.center_table)
        if table is None:
            issues.append(Issue(IssueKind.UNKNOWN_CENTER_TABLE, tm.center_table))
            continue
        for cm in tm.columns:
            if table.column(cm.center_column) is None:
                issues.append(
                    Issue(IssueKind.UNKNOWN_CENTER_COLUMN, f"{tm.center_table}.{cm.center_column}")
                )
    return issues


# ---------------------------------------------------------------------------
# XML plumbing
# ---------------------------------------------------------------------------

def _parse_root(xml_text, expected_root: str) -> ET.Element:
    if isinstance(xml_text, bytes):
        xml_text = xml_text.decode("utf-8")
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        cleaned = _TREE_MARKER.sub(r"\1", xml_text)
        if cleaned == xml_text:
            raise XmlMalformed(str(exc)) from None
        try:
            root = ET.fromstring(cleaned)
        except ET.ParseError:
            raise XmlMalformed(str(exc)) from None
    if root.tag != expected_root:
        raise XmlMalformed(f"expected root element <{expected_root}>, found <{root.tag}>")
    return root


def _require(elem: ET.Element, attr: str, error):
    value = elem.get(attr)
    if value is None:
        raise error(f"<{elem.tag}> is missing required attribute {attr!r}")
    return value


def _serialize(root: ET.Element) -> str:
    ET.indent(root, space="  ")
    return XML_PROLOG + ET.tostring(root, encoding="unicode") + "\n"


def load_virtual_schema(xml_text) -> VirtualSchema:
    root = _parse_root(xml_text, "database")
    tables = []
    for t in root.findall("table"):
        columns = [
            ColumnDef(
                name=_require(c, "name", SchemaInvalid),
                description=c.get("description", ""),
                datatype=_require(c, "datatype", SchemaInvalid),
            )
            for c in t.findall("column")
        ]
        tables.append(
            TableDef(
                name=_require(t, "name", SchemaInvalid),
                description=t.get("description", ""),
                columns=tuple(columns),
            )
        )
    return VirtualSchema(tuple(tables))


def save_virtual_schema(schema: VirtualSchema) -> str:
    root = ET.Element("database")
    for t in schema.tables:
        te = ET.SubElement(root, "table", {"name": t.name, "description": t.description})
        for c in t.columns:
            ET.SubElement(
                te,
                "column",
                {"name": c.name, "description": c.description, "datatype": c.datatype},
            )
    return _serialize(root)


def load_mapping(xml_text) -> MemberMapping:
    root = _parse_root(xml_text, "Mapping")
    conn = root.find("ConnectionString")
    if conn is None:
        raise MappingInvalid("missing <ConnectionString>")
    connection_string = _require(conn, "value", MappingInvalid)
    kind = conn.get("kind")

    port_elem = root.find("PortAddress/Port")
    if port_elem is None or not (port_elem.text or "").strip():
        raise MappingInvalid("missing <PortAddress><Port>")
    try:
        port = int(port_elem.text.strip())
    except ValueError:
        raise MappingInvalid(f"port {port_elem.text!r} is not an integer") from None

    tables = []
    for t in root.findall("Table"):
        columns = tuple(
            ColumnMap(
                _require(c, "CenterColumn", MappingInvalid),
                _require(c, "GridColumn", MappingInvalid),
            )
            for c in t.findall("Column")
        )
        tables.append(
            TableMap(
                _require(t, "CenterTable", MappingInvalid),
                _require(t, "GridTable", MappingInvalid),
                columns,
            )
        )
    return MemberMapping(
        connection_string=connection_string,
        tables=tuple(tables),
        port=port,
        backend_kind=kind,
    )


def save_mapping(mapping: MemberMapping) -> str:
    root = ET.Element("Mapping")
    attrs = {"value": mapping.connection_string}
    if mapping.backend_kind is not None:
        attrs["kind"] = mapping.backend_kind
    ET.SubElement(root, "ConnectionString", attrs)
    for tm in mapping.tables:
        te = ET.SubElement(root, "Table", {"CenterTable": tm.center_table, "GridTable": tm.grid_table})
        for cm in tm.columns:
            ET.SubElement(te, "Column", {"CenterColumn": cm.center_column, "GridColumn": cm.grid_column})
    pa = ET.SubElement(root, "PortAddress")
    ET.SubElement(pa, "Port").text = str(mapping.port)
    return _serialize(root)


def load_registry(xml_text) -> GridRegistry:
    root = _parse_root(xml_text, "GridList")
    members = []
    for g in root.findall("Grid"):
        raw_port = _require(g, "Port", RegistryInvalid)
        try:
            port = int(raw_port)
        except ValueError:
            raise RegistryInvalid(f"port {raw_port!r} is not an integer") from None
        members.append(
            GridMember(
                name=_require(g, "gridOrganization", RegistryInvalid),
                address=_require(g, "GridNetworkAddress", RegistryInvalid),
                port=port,
            )
        )
    return GridRegistry(tuple(members))


def save_registry(registry: GridRegistry) -> str:
    root = ET.Element("GridList")
    for m in registry.members:
        ET.SubElement(
            root,
            "Grid",
            {"gridOrganization": m.name, "GridNetworkAddress": m.address, "Port": str(m.port)},
        )
    return _serialize(root)


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def read_text(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def write_atomic(path, text: str) -> None:
    """Replace ``path`` with ``text`` so readers see the old or new file, never a mix."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_virtual_schema_file(path) -> VirtualSchema:
    return load_virtual_schema(read_text(path))


def load_mapping_file(path) -> MemberMapping:
    return load_mapping(read_text(path))


def load_registry_file(path) -> GridRegistry:
    return load_registry(read_text(path))
