"""Domain and split descriptions for the synthetic shift benchmark."""

from typing import List, Optional, Set, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from .training import SplitMode

RGB = Tuple[float, float, float]


class DomainSpec(BaseModel):
    """Nuisance factors of one domain. Shape geometry is never part of a domain."""

    name: str = Field(..., description="Domain tag")
    background_palette: List[RGB] = Field(..., description="Base background colors")
    background_texture: bool = Field(False, description="Overlay stripes/checker texture on the background")
    texture_strength: float = Field(0.0, ge=0.0, le=1.0)
    object_palette: List[RGB] = Field(..., description="Object colors")
    color_jitter: float = Field(0.05, ge=0.0, le=0.5, description="Uniform jitter added to palette draws")
    noise_level: float = Field(0.0, ge=0.0, le=1.0, description="Std of additive pixel noise")
    clutter_count: int = Field(0, ge=0, description="Distractor blobs drawn outside the object")
    clutter_palette: Optional[List[RGB]] = Field(None, description="Distractor colors; the background palette when unset")
    min_contrast: float = Field(0.25, ge=0.0, le=1.0, description="Minimum mean |object - background| color gap")

    @field_validator("background_palette", "object_palette", "clutter_palette")
    @classmethod
    def validate_palette(cls, v: Optional[List[RGB]]) -> Optional[List[RGB]]:
        if v is None:
            return v
        if not v:
            raise ValueError("palette must contain at least one color")
        for color in v:
            if any(c < 0.0 or c > 1.0 for c in color):
                raise ValueError(f"palette color {color} outside [0, 1]")
        return v

    def differs_from(self, other: "DomainSpec") -> bool:
        mine = self.model_dump(exclude={"name"})
        theirs = other.model_dump(exclude={"name"})
        return mine != theirs


class SplitSpec(BaseModel):
    """Which classes each domain sees.

    Class indices below ``num_classes`` are classifier outputs; unknown target
    classes are extra shape ids that the source never contains.
    """

    mode: SplitMode
    num_classes: int = Field(..., ge=2)
    shared_classes: List[int] = Field(default_factory=list)
    source_only_classes: List[int] = Field(default_factory=list)
    target_unknown_classes: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_sets(self) -> "SplitSpec":
        shared: Set[int] = set(self.shared_classes)
        source_only: Set[int] = set(self.source_only_classes)
        unknown: Set[int] = set(self.target_unknown_classes)
        if shared & source_only or shared & unknown or source_only & unknown:
            raise ValueError("class sets of a split must be disjoint")
        if shared | source_only != set(range(self.num_classes)):
            raise ValueError("shared and source-only classes must cover every source class")
        if self.mode == SplitMode.CLOSED and (source_only or unknown):
            raise ValueError("closed split shares every class")
        if self.mode == SplitMode.PARTIAL and (unknown or not source_only):
            raise ValueError("partial split restricts the target to a strict subset of source classes")
        if self.mode == SplitMode.OPEN and (source_only or not unknown):
            raise ValueError("open split adds target classes absent from the source")
        return self

    @property
    def source_classes(self) -> List[int]:
        return sorted(set(self.shared_classes) | set(self.source_only_classes))

    @property
    def target_classes(self) -> List[int]:
        return sorted(self.shared_classes)
