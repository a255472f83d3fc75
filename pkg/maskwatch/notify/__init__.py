"""
No-mask alert composition and dispatch.
"""

from .message import (
    UNKNOWN_PERSON,
    AlertMessage,
    compose_alert,
    format_timestamp,
    parse_sink,
    render_block,
)
from .notifier import Notifier, NotifyConfig
from .transports import (
    DispatchResult,
    FileSinkTransport,
    SmtpSettings,
    SmtpTransport,
    StdoutTransport,
    Transport,
)


def dispatch(msg: AlertMessage, transport: Transport) -> DispatchResult:
    """Send ``msg`` through ``transport``; failures come back as a result, not an exception."""
    return transport.dispatch(msg)


__all__ = [
    "UNKNOWN_PERSON",
    "AlertMessage",
    "compose_alert",
    "dispatch",
    "format_timestamp",
    "parse_sink",
    "render_block",
    "Notifier",
    "NotifyConfig",
    "DispatchResult",
    "Transport",
    "FileSinkTransport",
    "StdoutTransport",
    "SmtpSettings",
    "SmtpTransport",
]
