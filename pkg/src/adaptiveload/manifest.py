"""Run manifests embedded in (or written alongside) every CLI artifact."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass


def config_digest(payload) -> str:
    """Stable hash of the fully-resolved configuration for a command."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    inputs: dict
    outputs: dict
    seed: int | None
    config_digest: str

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)
