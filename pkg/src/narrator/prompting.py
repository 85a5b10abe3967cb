"""The three explanation strategies as multi-stage prompt plans.

All-at-once asks one vision call over the side-by-side concatenation.
Step-by-step captions each image separately, then composes the change
explanation from the two captions with a text-only call. Hybrid composes
from the captions AND the concatenated image.

Prompt texts ship as read-only assets with a checksum manifest; any drift
from the checked-in wording fails loudly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib import resources

from .backend import (
    BackendSpec,
    ChatRequest,
    Message,
    ResponseCache,
    Transport,
    cache_key,
    cached_complete,
    complete,
)
from .dataset import BiTemporalPair
from .imaging import as_data_uri, concat_side_by_side, encode_for_transport
from .metrics import word_count

PLACEHOLDER_BEFORE = "<DESCRIPTION_BEFORE>"
PLACEHOLDER_AFTER = "<DESCRIPTION_AFTER>"


class TemplateIntegrityError(Exception):
    """A prompt asset does not match the checksum manifest."""


class MissingBinding(Exception):
    """A template placeholder has no bound value."""


class AttachmentMismatch(Exception):
    """The stage's image requirement cannot be satisfied."""


class EmptyResponse(Exception):
    """A stage returned only whitespace."""


class StageError(Exception):
    """A backend error, annotated with the failing stage."""

    def __init__(self, stage_index: int, template_id: "TemplateId", cause: Exception):
        super().__init__(f"stage {stage_index} ({template_id.value}): {cause}")
        self.stage_index = stage_index
        self.template_id = template_id


class TemplateId(str, Enum):
    AAO_MAIN = "AAO_MAIN"
    SBS_CAPTION = "SBS_CAPTION"
    SBS_COMPOSE = "SBS_COMPOSE"
    HYB_CAPTION = "HYB_CAPTION"
    HYB_COMPOSE = "HYB_COMPOSE"


class ImageRequirement(str, Enum):
    NONE = "none"
    SINGLE = "single"
    CONCATENATED = "concatenated"


class Strategy(str, Enum):
    ALL_AT_ONCE = "all-at-once"
    STEP_BY_STEP = "step-by-step"
    HYBRID = "hybrid"


class BackendRole(str, Enum):
    CAPTIONER = "captioner"
    COMPOSER = "composer"


class ImageSource(str, Enum):
    NONE = "none"
    BEFORE = "before"
    AFTER = "after"
    CONCAT = "concat"


_TEMPLATE_FILES = {
    TemplateId.AAO_MAIN: "aao_main.txt",
    TemplateId.SBS_CAPTION: "caption_spatial.txt",
    TemplateId.HYB_CAPTION: "caption_spatial.txt",
    TemplateId.SBS_COMPOSE: "compose_change.txt",
    TemplateId.HYB_COMPOSE: "compose_change.txt",
}

_NEEDS_IMAGE = {
    TemplateId.AAO_MAIN: ImageRequirement.CONCATENATED,
    TemplateId.SBS_CAPTION: ImageRequirement.SINGLE,
    TemplateId.HYB_CAPTION: ImageRequirement.SINGLE,
    TemplateId.SBS_COMPOSE: ImageRequirement.NONE,
    TemplateId.HYB_COMPOSE: ImageRequirement.CONCATENATED,
}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: TemplateId
    text: str
    needs_image: ImageRequirement


def _asset_bytes(filename: str) -> bytes:
    return resources.files("narrator").joinpath("templates", filename).read_bytes()


def template_checksums() -> dict[str, str]:
    return json.loads(_asset_bytes("checksums.json").decode("utf-8"))


def verify_template_assets() -> None:
    """Check every shipped prompt asset against the checksum manifest."""
    manifest = template_checksums()
    for filename, expected in manifest.items():
        actual = hashlib.sha256(_asset_bytes(filename)).hexdigest()
        if actual != expected:
            raise TemplateIntegrityError(
                f"{filename}: sha256 {actual} does not match manifest {expected}"
            )


def load_template(template_id: TemplateId) -> PromptTemplate:
    filename = _TEMPLATE_FILES[template_id]
    data = _asset_bytes(filename)
    expected = template_checksums()[filename]
    actual = hashlib.sha256(data).hexdigest()
    if actual != expected:
        raise TemplateIntegrityError(
            f"{filename}: sha256 {actual} does not match manifest {expected}"
        )
    return PromptTemplate(
        template_id=template_id,
        text=data.decode("utf-8"),
        needs_image=_NEEDS_IMAGE[template_id],
    )


@dataclass(frozen=True)
class PlanStage:
    template_id: TemplateId
    backend_role: BackendRole
    image_source: ImageSource
    output_binding: str


@dataclass(frozen=True)
class StrategyPlan:
    strategy: Strategy
    stages: tuple[PlanStage, ...]


def build_plan(strategy: Strategy | str) -> StrategyPlan:
    strategy = Strategy(strategy)
    if strategy is Strategy.ALL_AT_ONCE:
        stages = (
            PlanStage(TemplateId.AAO_MAIN, BackendRole.COMPOSER, ImageSource.CONCAT, "explanation"),
        )
    elif strategy is Strategy.STEP_BY_STEP:
        stages = (
            PlanStage(TemplateId.SBS_CAPTION, BackendRole.CAPTIONER, ImageSource.BEFORE, "caption_before"),
            PlanStage(TemplateId.SBS_CAPTION, BackendRole.CAPTIONER, ImageSource.AFTER, "caption_after"),
            PlanStage(TemplateId.SBS_COMPOSE, BackendRole.COMPOSER, ImageSource.NONE, "explanation"),
        )
    else:
        stages = (
            PlanStage(TemplateId.HYB_CAPTION, BackendRole.CAPTIONER, ImageSource.BEFORE, "caption_before"),
            PlanStage(TemplateId.HYB_CAPTION, BackendRole.CAPTIONER, ImageSource.AFTER, "caption_after"),
            PlanStage(TemplateId.HYB_COMPOSE, BackendRole.COMPOSER, ImageSource.CONCAT, "explanation"),
        )
    return StrategyPlan(strategy=strategy, stages=stages)


@dataclass(frozen=True)
class GenerationRecord:
    """Full provenance of one generated explanation."""

    pair_id: str
    strategy: str
    captioner_backend: str
    composer_backend: str
    caption_before: str | None
    caption_after: str | None
    explanation: str
    stage_digests: tuple[str, ...]
    created_at: str
    word_count: int

    def to_json_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "strategy": self.strategy,
            "captioner_backend": self.captioner_backend,
            "composer_backend": self.composer_backend,
            "caption_before": self.caption_before,
            "caption_after": self.caption_after,
            "explanation": self.explanation,
            "stage_digests": list(self.stage_digests),
            "created_at": self.created_at,
            "word_count": self.word_count,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GenerationRecord":
        return cls(
            pair_id=data["pair_id"],
            strategy=data["strategy"],
            captioner_backend=data["captioner_backend"],
            composer_backend=data["composer_backend"],
            caption_before=data.get("caption_before"),
            caption_after=data.get("caption_after"),
            explanation=data["explanation"],
            stage_digests=tuple(data.get("stage_digests", ())),
            created_at=data.get("created_at", ""),
            word_count=data["word_count"],
        )


def render_stage(
    template: PromptTemplate,
    bindings: dict[str, str],
    pair: BiTemporalPair,
    spec: BackendSpec,
    image_source: ImageSource = ImageSource.NONE,
) -> ChatRequest:
    """Substitute bindings into the template and attach the stage's image.

    The message text is the template text with placeholders replaced
    verbatim; attachment count and content follow the image requirement.
    """
    text = template.text
    if PLACEHOLDER_BEFORE in text:
        if "caption_before" not in bindings:
            raise MissingBinding(f"{template.template_id.value}: caption_before")
        text = text.replace(PLACEHOLDER_BEFORE, bindings["caption_before"])
    if PLACEHOLDER_AFTER in text:
        if "caption_after" not in bindings:
            raise MissingBinding(f"{template.template_id.value}: caption_after")
        text = text.replace(PLACEHOLDER_AFTER, bindings["caption_after"])

    if template.needs_image is ImageRequirement.NONE:
        attachments: tuple[str, ...] = ()
    elif template.needs_image is ImageRequirement.SINGLE:
        if image_source is ImageSource.BEFORE:
            raster = pair.image_before
        elif image_source is ImageSource.AFTER:
            raster = pair.image_after
        else:
            raise AttachmentMismatch(
                f"{template.template_id.value}: single-image stage needs a "
                f"before/after source, got {image_source.value}"
            )
        attachments = (as_data_uri(encode_for_transport(raster)),)
    else:
        concat = concat_side_by_side(pair.image_before, pair.image_after)
        attachments = (as_data_uri(encode_for_transport(concat)),)

    if attachments and not spec.supports_images:
        raise AttachmentMismatch(
            f"{template.template_id.value}: backend {spec.name!r} cannot take images"
        )
    return ChatRequest(messages=(Message("user", text, attachments),), spec=spec)


def execute(
    plan: StrategyPlan,
    pair: BiTemporalPair,
    captioner: BackendSpec,
    composer: BackendSpec,
    cache: ResponseCache | None = None,
    transport: Transport | None = None,
) -> GenerationRecord:
    """Run the plan's stages in order and collect the full provenance.

    Later stages see earlier stage outputs through the caption bindings;
    backend failures surface as StageError with the failing stage attached.
    """
    bindings: dict[str, str] = {}
    digests: list[str] = []
    for index, stage in enumerate(plan.stages):
        template = load_template(stage.template_id)
        spec = captioner if stage.backend_role is BackendRole.CAPTIONER else composer
        request = render_stage(template, bindings, pair, spec, stage.image_source)
        digests.append(cache_key(request))
        try:
            if cache is not None:
                response, _ = cached_complete(request, cache, transport)
            else:
                response = complete(request, transport)
        except (MissingBinding, AttachmentMismatch):
            raise
        except Exception as exc:
            raise StageError(index, stage.template_id, exc) from exc
        text = response.text.strip()
        if not text:
            raise EmptyResponse(f"stage {index} ({stage.template_id.value}) returned whitespace")
        bindings[stage.output_binding] = text

    explanation = bindings["explanation"]
    return GenerationRecord(
        pair_id=pair.pair_id,
        strategy=plan.strategy.value,
        captioner_backend=captioner.name,
        composer_backend=composer.name,
        caption_before=bindings.get("caption_before"),
        caption_after=bindings.get("caption_after"),
        explanation=explanation,
        stage_digests=tuple(digests),
        created_at=datetime.now(timezone.utc).isoformat(),
        word_count=word_count(explanation),
    )
