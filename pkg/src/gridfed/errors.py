"""Exception hierarchy shared across the package."""


class GridError(Exception):
    """Base class for every error raised by gridfed."""


# -- configuration documents -------------------------------------------------

class ConfigError(GridError):
    pass


class XmlMalformed(ConfigError):
    pass


class SchemaInvalid(ConfigError):
    pass


class MappingInvalid(ConfigError):
    pass


class RegistryInvalid(ConfigError):
    pass


# -- SQL front end -----------------------------------------------------------

class ParseError(GridError):
    """Input is outside the supported SELECT grammar.

    ``position`` is the 0-based character offset of the offending token.
    """

    def __init__(self, position: int, message: str):
        super().__init__(f"{message} (at position {position})")
        self.position = position
        self.message = message


class ResolveError(GridError):
    """A center-schema query names something the virtual schema lacks."""


class UnknownTable(ResolveError):
    def __init__(self, name: str):
        super().__init__(f"unknown table {name!r}")
        self.name = name


class UnknownColumn(ResolveError):
    def __init__(self, table, name: str):
        where = f"{table}.{name}" if table else name
        super().__init__(f"unknown column {where!r}")
        self.table = table
        self.name = name


class AmbiguousColumn(ResolveError):
    def __init__(self, name: str, candidates):
        self.name = name
        self.candidates = tuple(candidates)
        super().__init__(
            f"column {name!r} is ambiguous; candidates: {', '.join(self.candidates)}"
        )


class UnknownQualifier(ResolveError):
    def __init__(self, name: str):
        super().__init__(f"unknown table or alias {name!r}")
        self.name = name


class DuplicateTableName(ResolveError):
    def __init__(self, name: str):
        super().__init__(f"table name or alias {name!r} used twice in one FROM clause")
        self.name = name


class MappingIncomplete(GridError):
    pass


class MappingIncompleteTable(MappingIncomplete):
    def __init__(self, center_table: str):
        super().__init__(f"member mapping has no entry for table {center_table!r}")
        self.center_table = center_table


class MappingIncompleteColumn(MappingIncomplete):
    def __init__(self, center_table: str, center_column: str):
        super().__init__(
            f"member mapping has no entry for column {center_table}.{center_column}"
        )
        self.center_table = center_table
        self.center_column = center_column


# -- wire --------------------------------------------------------------------

class ProtocolError(GridError):
    pass


class PayloadTooLarge(ProtocolError):
    pass


class FrameTruncated(ProtocolError):
    pass


class JsonMalformed(ProtocolError):
    pass


class UnknownMessageType(ProtocolError):
    pass


class FieldMissing(ProtocolError):
    def __init__(self, name: str):
        super().__init__(f"required field {name!r} missing")
        self.name = name


class FieldInvalid(ProtocolError):
    pass


class ConnectionFailed(GridError):
    pass


# -- backends ----------------------------------------------------------------

class BackendError(GridError):
    pass


class UnsupportedKind(BackendError):
    pass


class FixtureNotFound(BackendError):
    pass


class FixtureSyntaxError(BackendError):
    def __init__(self, position: int, message: str):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class TypeMismatch(BackendError):
    def __init__(self, table: str, column: str, value):
        super().__init__(f"value {value!r} does not fit column {table}.{column}")
        self.table = table
        self.column = column
        self.value = value


class ExecutionError(BackendError):
    """Query is well-formed but cannot be evaluated by the backend."""


class NoSuchTable(ExecutionError):
    pass


class NoSuchColumn(ExecutionError):
    pass


class SqlTypeError(ExecutionError):
    pass


# -- federation --------------------------------------------------------------

class NoSuccessfulMembers(GridError):
    pass
