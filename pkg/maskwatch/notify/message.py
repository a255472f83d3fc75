"""
Alert message composition and the sink block format.

A sink block is RFC-5322 shaped::

    From: <from_addr>
    To: <to_addr>
    Subject: <subject>
    Date: <ISO-8601 UTC>

    <body lines, a leading '.' doubled>
    .
"""

from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path

import jinja2
from pydantic import BaseModel, ConfigDict, field_validator

from ..base.exceptions import FormatError, InvalidAddress, IoFailure
from ..base.types import FrameID, PathLike, PersonID, Seconds

UNKNOWN_PERSON = "unknown person"
SUBJECT_PREFIX = "No-mask alert: "
TERMINATOR = "."


class AlertMessage(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    from_addr: str
    to_addr: str
    subject: str
    body: str
    date_s: Seconds

    @field_validator("from_addr", "to_addr")
    @classmethod
    def _one_at_sign(cls, value: str) -> str:
        validate_address(value)
        return value

    @field_validator("subject")
    @classmethod
    def _single_line(cls, value: str) -> str:
        if "\n" in value or "\r" in value:
            raise ValueError("subject must be a single line")
        return value


def validate_address(addr: str) -> None:
    """Raise :class:`InvalidAddress` unless ``addr`` is nonempty with exactly one '@'."""
    if not addr or addr.count("@") != 1 or any(c.isspace() for c in addr):
        raise InvalidAddress(f"Invalid address {addr!r}: expected exactly one '@'")


def format_timestamp(ts: Seconds) -> str:
    """ISO-8601 UTC with a ``Z`` suffix; microseconds only when nonzero."""
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> Seconds:
    for fmt in ("%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%dT%H:%M:%S.%fZ"):
        try:
            return datetime.strptime(text, fmt).replace(tzinfo=timezone.utc).timestamp()
        except ValueError:
            continue
    raise ValueError(f"Not an ISO-8601 UTC timestamp: {text!r}")


@lru_cache(maxsize=1)
def _environment() -> jinja2.Environment:
    return jinja2.Environment(
        loader=jinja2.PackageLoader("maskwatch", "notify/templates"),
        trim_blocks=True,
        lstrip_blocks=True,
        autoescape=False,
        undefined=jinja2.StrictUndefined,
    )


def compose_alert(
    person_id: PersonID | None,
    frame_id: FrameID,
    timestamp_s: Seconds,
    from_addr: str,
    to_addr: str,
) -> AlertMessage:
    """
    Build the no-mask alert. A pure function of its arguments.

    ``person_id=None`` addresses an unidentified face.

    Raises:
        InvalidAddress: If either address is malformed
    """
    validate_address(from_addr)
    validate_address(to_addr)
    label = person_id if person_id else UNKNOWN_PERSON
    body = (
        _environment()
        .get_template("alert_body.txt.jinja")
        .render(
            person_id=person_id,
            person_label=label,
            frame_id=frame_id,
            timestamp_iso=format_timestamp(timestamp_s),
        )
        .rstrip("\n")
    )
    return AlertMessage(
        from_addr=from_addr,
        to_addr=to_addr,
        subject=SUBJECT_PREFIX + label,
        body=body,
        date_s=timestamp_s,
    )


def render_block(msg: AlertMessage) -> str:
    lines = [
        f"From: {msg.from_addr}",
        f"To: {msg.to_addr}",
        f"Subject: {msg.subject}",
        f"Date: {format_timestamp(msg.date_s)}",
        "",
    ]
    lines.extend("." + line if line.startswith(".") else line for line in msg.body.split("\n"))
    lines.append(TERMINATOR)
    return "\n".join(lines) + "\n"


def parse_blocks(text: str, path: str | None = None) -> list[AlertMessage]:
    """Parse every block in a sink file's contents."""
    messages: list[AlertMessage] = []
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        if not lines[i]:
            i += 1
            continue
        start = i
        headers: dict[str, str] = {}
        while i < len(lines) and lines[i] != "":
            name, sep, value = lines[i].partition(": ")
            if not sep:
                raise FormatError(f"Bad header line {lines[i]!r}", path=path, line_number=i + 1)
            headers[name] = value
            i += 1
        i += 1  # blank separator
        body: list[str] = []
        while i < len(lines) and lines[i] != TERMINATOR:
            line = lines[i]
            body.append(line[1:] if line.startswith("..") else line)
            i += 1
        if i >= len(lines):
            raise FormatError("Unterminated block", path=path, line_number=start + 1)
        i += 1
        try:
            messages.append(
                AlertMessage(
                    from_addr=headers["From"],
                    to_addr=headers["To"],
                    subject=headers["Subject"],
                    body="\n".join(body),
                    date_s=parse_timestamp(headers["Date"]),
                )
            )
        except (KeyError, ValueError, InvalidAddress) as e:
            raise FormatError("Incomplete block headers", path=path, line_number=start + 1, cause=e) from e
    return messages


def parse_sink(path: PathLike) -> list[AlertMessage]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read sink: {e}", path=str(path), cause=e) from e
    return parse_blocks(text, path=str(path))
