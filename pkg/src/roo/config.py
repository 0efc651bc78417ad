"""Engine configuration flags, loadable from a JSON file named by ``ROO_CONFIG``."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

__all__ = [
    "DisputedPolicy",
    "CumulationMode",
    "CollectionBasis",
    "Config",
    "DEFAULT_PRIORITY_CHAPTERS",
    "load_config",
    "config_from_env",
]


class DisputedPolicy(Enum):
    USE_ENTRY = "use_entry"
    USE_FALLBACK = "use_fallback"


class CumulationMode(Enum):
    MEMBER = "member"
    FULL = "full"


class CollectionBasis(Enum):
    RETROACTIVE = "retroactive"
    FROM_DENIAL_DATE = "from_denial_date"


# agricultural chapters 01-24, apparel 61-62, electrical machinery 85
DEFAULT_PRIORITY_CHAPTERS = frozenset([f"{c:02d}" for c in range(1, 25)] + ["61", "62", "85"])


@dataclass(frozen=True)
class Config:
    disputed_policy: DisputedPolicy = DisputedPolicy.USE_FALLBACK
    cumulation_mode: CumulationMode = CumulationMode.MEMBER
    validity_months: int = 6
    strict_arabic: bool = False
    producer_may_prepare: bool = False
    accept_certified_copy: bool = True
    approved_exporter_required: bool = False
    cross_border_missions: bool = False
    collection_basis: CollectionBasis = CollectionBasis.FROM_DENIAL_DATE
    flag_drawback: bool = True
    # wholly obtained goods skip the insufficient-operations override when on
    exempt_wholly_obtained: bool = False
    priority_chapters: frozenset[str] = DEFAULT_PRIORITY_CHAPTERS

    def __post_init__(self) -> None:
        if self.validity_months < 1:
            raise ValueError("validity_months must be positive")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Config:
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs: dict[str, Any] = {}
        for key, raw in data.items():
            default = getattr(cls(), key)
            if isinstance(default, Enum):
                kwargs[key] = type(default)(raw)
            elif isinstance(default, bool):
                if not isinstance(raw, bool):
                    raise ValueError(f"{key} must be true or false")
                kwargs[key] = raw
            elif isinstance(default, int):
                if isinstance(raw, bool) or not isinstance(raw, int):
                    raise ValueError(f"{key} must be an integer")
                kwargs[key] = raw
            else:
                kwargs[key] = frozenset(str(c).zfill(2) for c in raw)
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Enum):
                v = v.value
            elif isinstance(v, frozenset):
                v = sorted(v)
            out[f.name] = v
        return out

    def with_overrides(self, **kwargs: Any) -> Config:
        return replace(self, **kwargs)


def load_config(path: str | os.PathLike[str]) -> Config:
    return Config.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def config_from_env(environ: dict[str, str] | None = None) -> Config:
    env = os.environ if environ is None else environ
    path = env.get("ROO_CONFIG")
    return load_config(path) if path else Config()
