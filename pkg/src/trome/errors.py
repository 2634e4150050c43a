"""Exception types shared across the package."""


class TromeError(Exception):
    """Base class for all package errors."""


class InvalidConfig(TromeError):
    """A frame or scenario parameter is outside its legal range."""


class MalformedPattern(TromeError):
    """A wake-up byte image violates the Manchester chip structure."""


class PayloadTooLarge(TromeError):
    """MAC payload exceeds the 246-byte slot limit."""


class SlotsOverflow(TromeError):
    """A slot count does not fit the 6-bit slot field (max 63)."""


class UnknownPacketType(TromeError):
    """Decoder met a type tag it does not recognize."""


class Truncated(TromeError):
    """Byte string is too short for the frame it claims to be."""


class ZeroData(TromeError):
    """Overhead ratio requested with zero delivered data bits."""


class OverlappingIntervals(TromeError):
    """Per-node radio state intervals overlap in time."""


class NoCapableTarget(TromeError):
    """No routing-request responder has a free slot."""


class DegenerateProbability(TromeError):
    """p*q == 0 leaves the delivery chain without an absorbing path."""


class SingularSystem(TromeError):
    """The expectation system has no unique solution."""


class ConfigError(TromeError):
    """Scenario, topology, or parameter combination is inconsistent."""
