"""Binds alert addresses to a transport for the pipeline."""

from pydantic import BaseModel, ConfigDict, field_validator

from ..base.types import FrameID, PersonID, Seconds
from .message import compose_alert, validate_address
from .transports import DispatchResult, Transport

DEFAULT_FROM = "maskwatch@localhost"
DEFAULT_TO = "security@localhost"


class NotifyConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    from_addr: str = DEFAULT_FROM
    to_addr: str = DEFAULT_TO

    @field_validator("from_addr", "to_addr")
    @classmethod
    def _valid(cls, value: str) -> str:
        validate_address(value)
        return value


class Notifier:
    def __init__(self, transport: Transport, config: NotifyConfig | None = None) -> None:
        self.transport = transport
        self.config = config or NotifyConfig()

    def notify(
        self, person_id: PersonID | None, frame_id: FrameID, timestamp_s: Seconds
    ) -> DispatchResult:
        msg = compose_alert(
            person_id, frame_id, timestamp_s, self.config.from_addr, self.config.to_addr
        )
        return self.transport.dispatch(msg)
