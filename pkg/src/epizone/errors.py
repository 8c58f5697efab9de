"""Exception hierarchy shared by all modules.

Every error raised by the library derives from EpizoneError so the CLI can
catch one type and turn it into a structured exit message.
"""

from __future__ import annotations


class EpizoneError(Exception):
    """Base class for all library errors."""


# --- dataset validation -------------------------------------------------

class MissingGeometry(EpizoneError):
    def __init__(self, unit_id: str):
        self.unit_id = unit_id
        super().__init__(f"no geometry supplied for unit {unit_id!r}")


class CalendarMismatch(EpizoneError):
    def __init__(self, unit_id: str, detail: str = ""):
        self.unit_id = unit_id
        super().__init__(f"calendar mismatch for unit {unit_id!r}" + (f": {detail}" if detail else ""))


class DuplicateUnit(EpizoneError):
    def __init__(self, unit_id: str):
        self.unit_id = unit_id
        super().__init__(f"duplicate unit id {unit_id!r}")


class NegativeCount(EpizoneError):
    def __init__(self, unit_id: str, day):
        self.unit_id = unit_id
        self.day = day
        super().__init__(f"negative count for unit {unit_id!r} at {day}")


class EmptyOverlap(EpizoneError):
    def __init__(self, unit_id: str = ""):
        super().__init__(f"no observation falls inside the target window ({unit_id})")


# --- parsing / ingest ---------------------------------------------------

class ParseError(EpizoneError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"parse error at line {line}: {reason}")


class DuplicateRecord(EpizoneError):
    def __init__(self, unit_id: str, date):
        super().__init__(f"duplicate record for unit {unit_id!r} on {date}")


class MissingTargetYear(EpizoneError):
    pass


class EmptyBaseline(EpizoneError):
    pass


class UnmappedUnit(EpizoneError):
    def __init__(self, unit_id: str):
        self.unit_id = unit_id
        super().__init__(f"unit {unit_id!r} missing from aggregation map")


class MissingUnitProperty(EpizoneError):
    pass


class InvalidRing(EpizoneError):
    pass


# --- reproduction number ------------------------------------------------

class InvalidParams(EpizoneError):
    pass


class EmptySeries(EpizoneError):
    pass


class InvalidWindow(EpizoneError):
    pass


# --- DTW ----------------------------------------------------------------

class InfeasibleWindow(EpizoneError):
    pass


class AllInvalid(EpizoneError):
    def __init__(self, unit_id: str):
        self.unit_id = unit_id
        super().__init__(f"unit {unit_id!r} has no valid R(t) days")


# --- spatial graph ------------------------------------------------------

class MissingPolygon(EpizoneError):
    def __init__(self, unit_id: str):
        self.unit_id = unit_id
        super().__init__(f"unit {unit_id!r} has no polygon")


class DuplicateCentroid(EpizoneError):
    pass


class Disconnected(EpizoneError):
    pass


# --- zoning -------------------------------------------------------------

class EmptyCluster(EpizoneError):
    pass


class EmptyFrontier(EpizoneError):
    pass


class InfeasibleMinSize(EpizoneError):
    pass


class SeedOverlap(EpizoneError):
    pass


# --- synthetic scenarios ------------------------------------------------

class InvalidProfile(EpizoneError):
    pass


class DisconnectedRegion(EpizoneError):
    pass


class UnitMismatch(EpizoneError):
    pass


class ConfigError(EpizoneError):
    pass
