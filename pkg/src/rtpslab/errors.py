"""Exception types raised across the datapath and the latency lab."""

from __future__ import annotations


class LabError(Exception):
    """Base class for every error raised by rtpslab."""


# -- serialization ----------------------------------------------------------

class CdrError(LabError, ValueError):
    pass


class EmbeddedNul(CdrError):
    pass


class Truncated(CdrError):
    pass


class UnknownEncapsulation(CdrError):
    pass


# -- wire protocol ----------------------------------------------------------

class RtpsError(LabError, ValueError):
    pass


class BadMagic(RtpsError):
    pass


class TruncatedHeader(RtpsError):
    pass


class TruncatedSubmessage(RtpsError):
    pass


class UnrepresentableLength(RtpsError):
    pass


class NoDestinations(RtpsError):
    pass


# -- ROS 2 layer ------------------------------------------------------------

class Ros2Error(LabError):
    pass


class EmptyTopic(Ros2Error, ValueError):
    pass


class DuplicateEntity(Ros2Error, ValueError):
    pass


class UnsupportedQos(Ros2Error, ValueError):
    pass


# -- transports -------------------------------------------------------------

class TransportError(LabError, OSError):
    pass


class TransportClosed(TransportError):
    pass


class BindFailed(TransportError):
    pass


class SendFailed(TransportError):
    pass


class DatagramTooLarge(TransportError, ValueError):
    pass


class InvalidModel(LabError, ValueError):
    pass


# -- measurement and analysis -----------------------------------------------

class PeerUnreachable(LabError):
    pass


class EmptySampleSet(LabError, ValueError):
    pass


class MissingReference(LabError, LookupError):
    pass


class NonpositiveReference(LabError, ValueError):
    pass


class NonpositiveInput(LabError, ValueError):
    pass


class ConsistencyWarning(UserWarning):
    """A computed total disagrees with a caller-supplied expected value."""
