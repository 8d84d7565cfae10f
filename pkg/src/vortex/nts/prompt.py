"""Composite prompt: prefix, transcript, NOTSS rubric postfix."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

TEMPLATE_VERSION = "notss-s1/1"


@dataclass(frozen=True)
class PromptTemplate:
    prefix: str
    postfix: str
    version: str = TEMPLATE_VERSION

    def build(self, transcript_text: str) -> str:
        return self.prefix + transcript_text + self.postfix


def _asset(name: str) -> str:
    return (Path(__file__).parent.parent / "data" / "prompt" / name).read_bytes().decode("utf-8")


def default_template() -> PromptTemplate:
    return PromptTemplate(_asset("prefix.txt"), _asset("postfix.txt"))


def build_prompt(transcript_text: str, template: PromptTemplate | None = None) -> str:
    """Byte-exact concatenation; the transcript is not touched."""
    return (template or default_template()).build(transcript_text)
