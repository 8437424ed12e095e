"""Central finite-difference gradient verification.

The numeric side never touches the adjoint code: it re-runs the forward
function with single coordinates perturbed by +/- step and differences the
loss values. Relative error uses a floored denominator so near-zero gradients
compare by an absolute criterion instead of blowing up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .autograd import Tape, Tensor, zero_grads

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
# floors the relative-error denominator; 1e-9 absolute agreement required
# for gradients below this scale, comfortably above fp64 difference noise
DENOM_FLOOR = 1e-5


@dataclass
class GradCheckReport:
    """Worst relative error per checked tensor, plus the overall verdict."""

    max_rel_error: float = 0.0
    worst_name: str = ""
    per_tensor: dict[str, float] = field(default_factory=dict)
    checked_coords: int = 0

    def passed(self, tol: float = DEFAULT_TOL) -> bool:
        return self.max_rel_error < tol

    def summary(self) -> str:
        worst = sorted(self.per_tensor.items(), key=lambda kv: -kv[1])[:3]
        detail = ", ".join(f"{name}={err:.3e}" for name, err in worst)
        return (f"max rel error {self.max_rel_error:.3e} at "
                f"{self.worst_name or '<none>'} over {self.checked_coords} "
                f"coordinates (worst: {detail})")


def _rel_error(a: float, n: float, floor: float) -> float:
    return abs(a - n) / max(floor, abs(a), abs(n))


def numeric_grad_coord(loss_fn: Callable[[], Tensor], t: Tensor,
                       coord: tuple[int, ...], step: float = DEFAULT_STEP) -> float:
    """Central difference d(loss)/d(t[coord]), re-running the forward twice."""
    original = t.data[coord]
    t.data[coord] = original + step
    up = float(loss_fn().data)
    t.data[coord] = original - step
    down = float(loss_fn().data)
    t.data[coord] = original
    return (up - down) / (2.0 * step)


def check_gradients(loss_fn: Callable[[], Tensor],
                    named_tensors: Mapping[str, Tensor] |
                    Sequence[tuple[str, Tensor]],
                    step: float = DEFAULT_STEP,
                    coords_per_tensor: int | None = None,
                    rng: np.random.Generator | None = None,
                    floor: float = DENOM_FLOOR) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must rebuild the forward pass from the tensors' current data
    on every call (no caching). With ``coords_per_tensor`` set, only that many
    randomly sampled coordinates per tensor are differenced, which keeps
    full-model checks fast; otherwise every coordinate is checked.
    """
    if isinstance(named_tensors, Mapping):
        named_tensors = list(named_tensors.items())
    tensors = [t for _, t in named_tensors]
    zero_grads(tensors)
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)

    report = GradCheckReport()
    for name, t in named_tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        all_coords = list(np.ndindex(t.data.shape))
        if coords_per_tensor is not None and len(all_coords) > coords_per_tensor:
            if rng is None:
                rng = np.random.default_rng(0)
            picks = rng.choice(len(all_coords), size=coords_per_tensor, replace=False)
            coords = [all_coords[int(i)] for i in picks]
        else:
            coords = all_coords
        worst = 0.0
        for coord in coords:
            numeric = numeric_grad_coord(loss_fn, t, coord, step=step)
            worst = max(worst, _rel_error(float(analytic[coord]), numeric, floor))
            report.checked_coords += 1
        report.per_tensor[name] = worst
        if worst > report.max_rel_error:
            report.max_rel_error = worst
            report.worst_name = name
    return report
