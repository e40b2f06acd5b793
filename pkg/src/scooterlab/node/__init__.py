"""On-scooter logic: sampling, trip segmentation, durable store-and-forward."""

from .agent import DRAINING, IDLE, RECORDING, NodeAgent
from .outbox import Outbox, OutboxFull
from .uplink import DirectUplink, HttpUplink, UplinkUnavailable

__all__ = [
    "NodeAgent",
    "IDLE",
    "RECORDING",
    "DRAINING",
    "Outbox",
    "OutboxFull",
    "DirectUplink",
    "HttpUplink",
    "UplinkUnavailable",
]
