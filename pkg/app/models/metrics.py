"""Metric records written to the JSON-lines logs and summary CSVs."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class LossBreakdown(BaseModel):
    im: float = Field(0.0, description="Information maximization loss")
    sl: float = Field(0.0, description="Self-labeling loss")
    kd: float = Field(0.0, description="Distillation loss")
    tgt: float = Field(0.0, description="Weighted total")


class MetricsRecord(BaseModel):
    epoch: int = Field(..., ge=0)
    accuracy: float = Field(..., ge=0.0, le=1.0)
    balanced_accuracy: float = Field(..., ge=0.0, le=1.0)
    per_class_accuracy: List[Optional[float]] = Field(default_factory=list,
                                                      description="None for classes absent from the eval set")
    unknown_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0, description="Open-set only")
    known_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0, description="Open-set only")
    pseudo_label_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    attention_overlap: Optional[float] = Field(None, ge=0.0, le=1.0)
    losses: Optional[LossBreakdown] = None

    def to_log_line(self, **context: Any) -> Dict[str, Any]:
        """Flat dict for one JSON line."""
        losses = self.losses or LossBreakdown()
        line: Dict[str, Any] = dict(context)
        line.update({
            "epoch": self.epoch,
            "L_im": losses.im,
            "L_sl": losses.sl,
            "L_kd": losses.kd,
            "L_tgt": losses.tgt,
            "target_accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "pseudo_label_accuracy": self.pseudo_label_accuracy,
            "attention_overlap": self.attention_overlap,
            "unknown_accuracy": self.unknown_accuracy,
        })
        return line


class SummaryRow(BaseModel):
    """One row of summary.csv."""

    method: str
    seed: int
    accuracy: float
    attention_overlap: Optional[float] = None
    pseudo_label_accuracy: Optional[float] = None
