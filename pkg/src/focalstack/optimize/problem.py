"""Denoising problem definition, energies, proximal maps, and solver traces.

The refinement energy is total variation plus a fidelity term tied to the
observed field I:

    L1 (default):  P(t) = lambda * sum |t - I|    + sum |grad t|_2
    L2 (ROF):      P(t) = lambda/2 * sum (t - I)^2 + sum |grad t|_2

Proximal maps follow the scaled form argmin_p { alpha R(p) + 1/2 |p - w|^2 }.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from focalstack.optimize.operators import gradient_op
from focalstack.stack_io import DepthMap


@dataclass(frozen=True)
class DenoiseProblem:
    """Observed noisy field with fidelity weight and norm choice."""

    observed: np.ndarray
    lam: float = 0.7
    fidelity: str = "l1"

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=float)
        if obs.ndim != 2:
            raise ValueError("observed field must be 2-D")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observed field must be finite")
        if self.lam <= 0:
            raise ValueError("fidelity weight lambda must be positive")
        if self.fidelity not in ("l1", "l2"):
            raise ValueError(f"unknown fidelity: {self.fidelity!r}")
        object.__setattr__(self, "observed", obs)

    @property
    def shape(self) -> tuple[int, int]:
        return self.observed.shape


def energy(problem: DenoiseProblem, t: np.ndarray) -> float:
    """Fidelity plus isotropic total variation at the candidate field."""
    t = np.asarray(t, dtype=float)
    if t.shape != problem.shape:
        raise ValueError("candidate field shape must match the problem")
    diff = t - problem.observed
    if problem.fidelity == "l1":
        fid = problem.lam * np.abs(diff).sum()
    else:
        fid = 0.5 * problem.lam * (diff**2).sum()
    g = gradient_op(t)
    tv = np.sqrt(g[0] ** 2 + g[1] ** 2).sum()
    return float(fid + tv)


# ---------------------------------------------------------------------------
# Proximable terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class L1Fidelity:
    """R(p) = lam * sum |p - reference|: prox soft-thresholds toward I."""

    lam: float
    reference: np.ndarray


@dataclass(frozen=True)
class L2Fidelity:
    """R(p) = lam/2 * sum (p - reference)^2: prox shrinks toward I."""

    lam: float
    reference: np.ndarray


@dataclass(frozen=True)
class IsotropicTV:
    """S(q) = sum_pixels |q_pixel|_2 over (2, h, w) fields."""


@dataclass(frozen=True)
class TVDualBall:
    """Indicator of { |q_pixel|_2 <= 1 }: prox is the radial projection."""


def _project_unit_ball(q: np.ndarray) -> np.ndarray:
    mag = np.sqrt(q[0] ** 2 + q[1] ** 2)
    scale = 1.0 / np.maximum(1.0, mag)
    return q * scale[None, :, :]


def prox(term, alpha: float, omega: np.ndarray) -> np.ndarray:
    """Proximal map of ``alpha * term`` evaluated at omega."""
    if alpha <= 0:
        raise ValueError("prox scale alpha must be positive")
    omega = np.asarray(omega, dtype=float)
    if isinstance(term, L1Fidelity):
        thresh = alpha * term.lam
        d = omega - term.reference
        return term.reference + np.sign(d) * np.maximum(np.abs(d) - thresh, 0.0)
    if isinstance(term, L2Fidelity):
        al = alpha * term.lam
        return (omega + al * term.reference) / (1.0 + al)
    if isinstance(term, TVDualBall):
        return _project_unit_ball(omega)
    if isinstance(term, IsotropicTV):
        # Moreau identity against the dual-ball projection.
        return omega - alpha * _project_unit_ball(omega / alpha)
    raise ValueError(f"unknown term spec: {term!r}")


# ---------------------------------------------------------------------------
# Solver configuration and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PADMMConfig:
    """Penalty, step sizes, and stopping rule.

    Step sizes left at None are derived as 0.9 / (gamma * L^2) with L the
    power-iteration norm of the split constraint; explicit values must
    satisfy zeta1 < 1/(gamma |W|^2) and zeta2 < 1/(gamma |T|^2) or the
    solver refuses to run. The default penalty was chosen on the synthetic
    depth suite: gamma = 3 drives the splitting residual well below every
    forward-backward baseline at equal iteration budget without hurting
    the final energy.
    """

    gamma: float = 3.0
    zeta1: float | None = None
    zeta2: float | None = None
    max_iters: int = 300
    tol: float = 0.01
    power_iters: int = 50

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("penalty gamma must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


@dataclass(frozen=True)
class TraceRecord:
    k: int
    energy: float
    residual_norm: float
    energy_decay: float | None
    wall_ms: float


@dataclass
class SolverTrace:
    """Per-iteration energy/residual records for one solve."""

    method: str
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual_norm for r in self.records])

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual_norm

    def convergence_iteration(self, tol: float) -> int | None:
        """First iteration whose energy decay falls back to tol.

        Mirrors the solver's stopping rule: the test arms once the decay
        has exceeded tol, so the flat warm-up phase does not count.
        """
        armed = False
        for r in self.records:
            if r.energy_decay is None:
                continue
            if r.energy_decay > tol:
                armed = True
            elif armed:
                return r.k
        return None

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "energy", "residual_norm", "energy_decay", "wall_ms"])
            for r in self.records:
                decay = "" if r.energy_decay is None else repr(r.energy_decay)
                writer.writerow([r.k, repr(r.energy), repr(r.residual_norm), decay, f"{r.wall_ms:.3f}"])


def trace_metrics(trace: SolverTrace) -> dict:
    """Decay series plus residual statistics for a finished trace."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    res = trace.residuals
    decay = np.array(
        [r.energy_decay for r in trace.records if r.energy_decay is not None]
    )
    return {
        "energy_decay": decay,
        "residuals": res,
        "mean_residual": float(res.mean()),
        "std_residual": float(res.std()),
        "final_residual": float(res[-1]),
    }


def energy_decay_value(e_curr: float, e_prev: float, e_initial: float) -> float:
    """Successive energy change relative to the starting energy."""
    return abs(e_curr - e_prev) / max(e_initial, 1e-12)


def as_depth_map(values: np.ndarray) -> DepthMap:
    return DepthMap(values=values, confidence=np.ones_like(values))
