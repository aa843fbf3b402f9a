"""Generation-prompt rendering for the four data kinds.

Templates are external text files with a small front-matter header and named
sections; the files shipped under ``vifforge/templates`` are the versioned
defaults and their content hash travels with every rendered request so
datasets stay traceable to the exact wording that produced them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .canonical import sha256_hex
from .corpus import ImageRecord
from .errors import ContractError, ParseError

CONVERSATION_TURNS = 8

KNOWN_PLACEHOLDERS = frozenset({"objects", "languages"})
_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")

SCENE_GRAPH_PREAMBLE = (
    "Before writing any question or answer, first build a relationship graph of "
    "the listed objects: note every pair of related objects and their relative "
    "position. Use that graph, and only that graph, as the basis for the "
    "location questions and answers that follow."
)


class DataKind(Enum):
    OBJECT_CENTRIC = "object"
    LOCATION_CENTRIC = "location"
    ATMOSPHERE_CENTRIC = "atmosphere"
    CONVERSATION = "conversation"

    @classmethod
    def parse(cls, text: str) -> "DataKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ContractError(f"unknown data kind {text!r}; expected one of: {valid}")


@dataclass(frozen=True)
class PromptTemplate:
    kind: DataKind
    system_message: str
    instruction_body: str
    seed_examples: tuple[str, str]
    required_turns: int | None = None
    source_hash: str = ""


@dataclass(frozen=True)
class GenerationRequest:
    image: ImageRecord
    kind: DataKind
    languages: tuple[str, ...]
    rendered_prompt: str
    template_hash: str = ""

    def __post_init__(self) -> None:
        if not self.languages:
            raise ContractError("languages must be non-empty")
        if len(set(self.languages)) != len(self.languages):
            raise ContractError(f"duplicate language in {self.languages}")

    @property
    def request_id(self) -> str:
        return f"{self.image.image_id}:{self.kind.value}"


def _check_placeholders(text: str, path: str) -> None:
    for match in _PLACEHOLDER_RE.finditer(text):
        if match.group(1) not in KNOWN_PLACEHOLDERS:
            raise ParseError(f"{path}: unknown placeholder {{{{{match.group(1)}}}}}")


def _parse_front_matter(lines: list[str], path: str) -> tuple[dict[str, str], int]:
    if not lines or lines[0].strip() != "---":
        raise ParseError(f"{path}: template must start with '---' front-matter")
    meta: dict[str, str] = {}
    for i, line in enumerate(lines[1:], start=1):
        if line.strip() == "---":
            return meta, i + 1
        if not line.strip():
            continue
        if ":" not in line:
            raise ParseError(f"{path}: bad front-matter line {line!r}")
        key, _, value = line.partition(":")
        key = key.strip()
        if key not in ("kind", "required_turns"):
            raise ParseError(f"{path}: unknown front-matter key {key!r}")
        meta[key] = value.strip()
    raise ParseError(f"{path}: unterminated front-matter")


def _parse_sections(lines: list[str], path: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {"system": [], "instruction": [], "seed-example": []}
    bodies: dict[str, list[str]] = {}
    current: str | None = None
    counter = 0
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1]
            if name not in sections:
                raise ParseError(f"{path}: unknown section [{name}]")
            counter += 1
            current = f"{name}#{counter}" if name == "seed-example" else name
            if current in bodies:
                raise ParseError(f"{path}: duplicate section [{name}]")
            bodies[current] = []
            continue
        if current is None:
            if stripped:
                raise ParseError(f"{path}: content before first section header")
            continue
        bodies[current].append(line)
    return bodies


def load_template(path: str | Path) -> PromptTemplate:
    """Load and validate one template file; any structural problem is a load error."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    return parse_template(raw, str(path))


def parse_template(raw: str, label: str = "<template>") -> PromptTemplate:
    lines = raw.splitlines()
    meta, body_start = _parse_front_matter(lines, label)
    if "kind" not in meta:
        raise ParseError(f"{label}: front-matter missing 'kind'")
    kind = DataKind.parse(meta["kind"])

    required_turns: int | None = None
    if "required_turns" in meta:
        try:
            required_turns = int(meta["required_turns"])
        except ValueError:
            raise ParseError(f"{label}: required_turns must be an integer")
    if kind is DataKind.CONVERSATION:
        if required_turns != CONVERSATION_TURNS:
            raise ParseError(
                f"{label}: conversation templates must declare "
                f"required_turns: {CONVERSATION_TURNS}"
            )
    elif required_turns is not None:
        raise ParseError(f"{label}: required_turns is only valid for conversation")

    bodies = _parse_sections(lines[body_start:], label)
    system = "\n".join(bodies.get("system", [])).strip()
    instruction = "\n".join(bodies.get("instruction", [])).strip()
    seeds = [
        "\n".join(bodies[key]).strip()
        for key in sorted(bodies)
        if key.startswith("seed-example#")
    ]
    if not system:
        raise ParseError(f"{label}: missing [system] section")
    if not instruction:
        raise ParseError(f"{label}: missing [instruction] section")
    if len(seeds) != 2 or not all(seeds):
        raise ParseError(f"{label}: exactly 2 non-empty [seed-example] sections required")
    _check_placeholders(system, label)
    _check_placeholders(instruction, label)
    for required in sorted(KNOWN_PLACEHOLDERS):
        if f"{{{{{required}}}}}" not in instruction:
            raise ParseError(
                f"{label}: [instruction] must contain the {{{{{required}}}}} placeholder"
            )

    return PromptTemplate(
        kind=kind,
        system_message=system,
        instruction_body=instruction,
        seed_examples=(seeds[0], seeds[1]),
        required_turns=required_turns,
        source_hash=sha256_hex(raw),
    )


def default_template_dir() -> Path:
    return Path(str(resources.files("vifforge").joinpath("templates")))


def load_template_set(directory: str | Path | None = None) -> dict[DataKind, PromptTemplate]:
    """Load every *.txt template in a directory, keyed by kind.

    A directory providing two templates for the same kind is a load error;
    callers needing only some kinds simply don't request the others.
    """
    directory = Path(directory) if directory is not None else default_template_dir()
    templates: dict[DataKind, PromptTemplate] = {}
    for path in sorted(directory.glob("*.txt")):
        template = load_template(path)
        if template.kind in templates:
            raise ParseError(f"{path}: duplicate template for kind {template.kind.value}")
        templates[template.kind] = template
    if not templates:
        raise ParseError(f"no *.txt templates found in {directory}")
    return templates


def _substitute(text: str, objects: str, languages: str) -> str:
    return text.replace("{{objects}}", objects).replace("{{languages}}", languages)


def build_prompt(
    image: ImageRecord,
    kind: DataKind,
    template: PromptTemplate,
    languages: list[str] | tuple[str, ...],
) -> GenerationRequest:
    """Render the full generation prompt for one (image, kind) pair.

    The rendered prompt always contains every object name verbatim, the
    language list, and both seed examples; conversation prompts additionally
    carry the explicit turn-count requirement. Rendering is deterministic.
    """
    if template.kind is not kind:
        raise ContractError(
            f"template kind {template.kind.value} does not match requested {kind.value}"
        )
    if not image.object_names:
        raise ContractError(f"image {image.image_id!r} has no objects")

    objects = ", ".join(image.object_names)
    language_list = ", ".join(languages)
    parts: list[str] = []
    if kind is DataKind.LOCATION_CENTRIC:
        parts.append(location_prompt_preamble(template))
    parts.append(_substitute(template.system_message, objects, language_list))
    parts.append(_substitute(template.instruction_body, objects, language_list))
    parts.append("Example 1:\n" + template.seed_examples[0])
    parts.append("Example 2:\n" + template.seed_examples[1])
    if template.required_turns is not None:
        parts.append(
            f"Produce exactly {template.required_turns} question-and-answer "
            f"turns for this image."
        )
    return GenerationRequest(
        image=image,
        kind=kind,
        languages=tuple(languages),
        rendered_prompt="\n\n".join(parts),
        template_hash=template.source_hash,
    )


def location_prompt_preamble(template: PromptTemplate) -> str:
    """The graph-then-QA instruction that location prompts must open with."""
    if template.kind is not DataKind.LOCATION_CENTRIC:
        raise ContractError(
            f"location preamble requested for {template.kind.value} template"
        )
    return SCENE_GRAPH_PREAMBLE
