"""Quality dimensions and the input layout each one is bound to."""

from __future__ import annotations

import enum


class InputMode(str, enum.Enum):
    PAIRED = "paired"              # [CLS] document [SEP] summary [SEP]
    SUMMARY_ONLY = "summary_only"  # [CLS] summary [SEP]


class QualityDimension(str, enum.Enum):
    COHERENCE = "coherence"
    CONSISTENCY = "consistency"
    FLUENCY = "fluency"
    RELEVANCE = "relevance"

    @property
    def input_mode(self) -> InputMode:
        if self in (QualityDimension.CONSISTENCY, QualityDimension.RELEVANCE):
            return InputMode.PAIRED
        return InputMode.SUMMARY_ONLY

    @classmethod
    def parse(cls, name: str | QualityDimension) -> QualityDimension:
        if isinstance(name, QualityDimension):
            return name
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(d.value for d in cls)
            raise ValueError(f"unknown quality dimension {name!r} (expected one of: {valid})") from None


ALL_DIMENSIONS: tuple[QualityDimension, ...] = tuple(QualityDimension)
