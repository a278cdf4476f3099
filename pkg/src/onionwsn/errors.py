"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class OnionWSNError(Exception):
    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class DisconnectedTopology(OnionWSNError):
    code = "disconnected-topology"


class NoSuchSensor(OnionWSNError, KeyError):
    code = "no-such-sensor"


class Unreachable(OnionWSNError):
    code = "unreachable"


class InvalidPoint(OnionWSNError, ValueError):
    code = "invalid-point"


class PathSelectionStuck(OnionWSNError):
    code = "path-selection-stuck"


class OnionTooSmall(OnionWSNError, ValueError):
    code = "onion-too-small-for-t"


class RecoveryMismatch(OnionWSNError):
    code = "recovery-mismatch"


class LayerAuthFailure(OnionWSNError):
    code = "layer-auth-failure"


class MalformedQuery(OnionWSNError, ValueError):
    code = "malformed-query"


class PacketOverflow(OnionWSNError):
    code = "packet-overflow"


class TooManyInfected(OnionWSNError, ValueError):
    code = "too-many-infected"


class EmptyNetwork(OnionWSNError, ValueError):
    code = "empty-network"


class NoRoom(OnionWSNError):
    code = "no-room"


class PoolUnderflow(OnionWSNError, ValueError):
    code = "pool-underflow"
