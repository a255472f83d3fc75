"""
Alert transports.

Every transport implements ``_deliver`` and inherits :meth:`Transport.dispatch`,
which serializes deliveries behind a lock (blocks never interleave when a
transport is shared across pipelines) and turns delivery errors into a
failed :class:`DispatchResult` instead of raising.
"""

import logging
import os
import smtplib
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from email.message import EmailMessage
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field
from rich.console import Console
from rich.panel import Panel

from ..base.exceptions import SinkUnavailable
from ..base.types import PathLike
from .message import AlertMessage, format_timestamp, render_block

logger = logging.getLogger(__name__)

ENV_PREFIX = "MASKWATCH_SMTP_"


@dataclass(frozen=True)
class DispatchResult:
    ok: bool
    error: SinkUnavailable | None = None

    @property
    def reason(self) -> str | None:
        return str(self.error) if self.error else None

    def raise_for_failure(self) -> None:
        if self.error is not None:
            raise self.error


class Transport(ABC):
    """Base class for alert transports."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.delivered = 0

    def dispatch(self, msg: AlertMessage) -> DispatchResult:
        """Deliver ``msg``; never raises for delivery problems."""
        with self._lock:
            try:
                self._deliver(msg)
            except SinkUnavailable as e:
                logger.warning("Alert dispatch failed: %s", e)
                return DispatchResult(ok=False, error=e)
            self.delivered += 1
            return DispatchResult(ok=True)

    @abstractmethod
    def _deliver(self, msg: AlertMessage) -> None:
        """Send one message or raise :class:`SinkUnavailable`."""


class FileSinkTransport(Transport):
    """Appends one block per message to a UTF-8 text file."""

    def __init__(self, path: PathLike) -> None:
        super().__init__()
        self.path = Path(path)

    def _deliver(self, msg: AlertMessage) -> None:
        try:
            with self.path.open("a", encoding="utf-8", newline="\n") as fh:
                fh.write(render_block(msg))
        except OSError as e:
            raise SinkUnavailable(f"Cannot append to sink {self.path}", cause=e) from e


class StdoutTransport(Transport):
    """On-screen notification rendered with rich."""

    def __init__(self, console: Console | None = None) -> None:
        super().__init__()
        self.console = console or Console(highlight=False)

    def _deliver(self, msg: AlertMessage) -> None:
        try:
            self.console.print(
                Panel(
                    msg.body,
                    title=msg.subject,
                    subtitle=f"{msg.to_addr} | {format_timestamp(msg.date_s)}",
                    expand=False,
                ),
                markup=False,
            )
        except OSError as e:
            raise SinkUnavailable("Console unavailable", cause=e) from e


class SmtpSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    host: str
    port: int = Field(default=587, ge=1, le=65535)
    username: str | None = None
    password: str | None = None
    starttls: bool = True
    timeout: float = Field(default=10.0, gt=0)

    @classmethod
    def from_env(cls, env_file: PathLike | None = None) -> "SmtpSettings":
        """
        Read ``MASKWATCH_SMTP_HOST``/``PORT``/``USER``/``PASSWORD``/``STARTTLS``,
        after loading ``env_file`` (or a ``.env`` in the working directory).
        """
        load_dotenv(env_file)
        host = os.getenv(f"{ENV_PREFIX}HOST")
        if not host:
            raise SinkUnavailable(f"{ENV_PREFIX}HOST is not set")
        try:
            port = int(os.getenv(f"{ENV_PREFIX}PORT", "587"))
        except ValueError as e:
            raise SinkUnavailable(f"{ENV_PREFIX}PORT is not an integer", cause=e) from e
        return cls(
            host=host,
            port=port,
            username=os.getenv(f"{ENV_PREFIX}USER") or None,
            password=os.getenv(f"{ENV_PREFIX}PASSWORD") or None,
            starttls=os.getenv(f"{ENV_PREFIX}STARTTLS", "1").lower() not in ("0", "false", "no"),
        )


class SmtpTransport(Transport):
    """Network mail via ``smtplib``. Not used unless explicitly configured."""

    def __init__(self, settings: SmtpSettings) -> None:
        super().__init__()
        self.settings = settings

    def _deliver(self, msg: AlertMessage) -> None:
        email = EmailMessage()
        email["From"] = msg.from_addr
        email["To"] = msg.to_addr
        email["Subject"] = msg.subject
        email["Date"] = format_timestamp(msg.date_s)
        email.set_content(msg.body)
        s = self.settings
        try:
            with smtplib.SMTP(s.host, s.port, timeout=s.timeout) as server:
                if s.starttls:
                    server.starttls()
                if s.username and s.password:
                    server.login(s.username, s.password)
                server.send_message(email)
        except (OSError, smtplib.SMTPException) as e:
            raise SinkUnavailable(f"SMTP delivery to {s.host}:{s.port} failed", cause=e) from e
