"""Exponential moving average of student weights into the teacher."""

from typing import Iterable

import numpy as np

from app.nn.params import FEATURE_EXTRACTOR_GROUPS, ModelParams, ParamGroup
from app.utils.exceptions import ContractError


def ema_update(
    teacher: ModelParams,
    student: ModelParams,
    momentum: float,
    groups: Iterable[ParamGroup] = FEATURE_EXTRACTOR_GROUPS,
) -> None:
    """theta_T <- momentum * theta_T + (1 - momentum) * theta_S, BN buffers included.

    The classifier is frozen and shared, so it is not part of the default groups.
    """
    if not 0.0 <= momentum <= 1.0:
        raise ContractError(f"EMA momentum must lie in [0, 1], got {momentum}")
    for group in groups:
        teacher_items = dict(teacher.group_tensors(group))
        student_items = dict(student.group_tensors(group))
        if teacher_items.keys() != student_items.keys():
            raise ContractError(f"Teacher and student differ in group '{group.value}'")
        for name, t_tensor in teacher_items.items():
            s_tensor = student_items[name]
            if t_tensor.shape != s_tensor.shape:
                raise ContractError(
                    f"EMA shape mismatch for '{group.value}.{name}': {t_tensor.shape} vs {s_tensor.shape}"
                )
            blended = momentum * t_tensor.data + (1.0 - momentum) * s_tensor.data
            t_tensor.data = np.asarray(blended, dtype=t_tensor.data.dtype)
