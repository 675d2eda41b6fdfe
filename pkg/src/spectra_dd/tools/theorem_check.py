"""
Check of the duality-gap and feasibility guarantees of the improved scheme.

Runs the optimal-gradient scheme on a convex approximation with the
formulaic smoothing parameter and iteration budget, then measures

- the duality gap ``g(lam_hat) - sum_k b_cvx(s_hat_k)`` against ``eps``
- the violation ``||[sum_k s_hat_k - P]^+||`` against
  ``eps * (||lam*|| + sqrt(||lam*||^2 + 2))``

with ``lam*`` taken from a run at ``eps / reference_factor``.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from ..core.convex_approx import ConvexApprox, build_approx, surrogate_values
from ..core.dual_solvers import (
    SolverConfig,
    dual_value,
    smoothing_schedule,
    solve_improved,
)
from ..core.exceptions import VerificationError
from ..core.model import Scenario
from ..core.pertone import ProxConfig, ToneSolver

logger = logging.getLogger(__name__)


@dataclass
class TheoremCheck:
    """Measured quantities and bounds of one guarantee check."""

    scenario: str
    epsilon: float
    i_max: int
    smoothness_c: float
    lipschitz: float
    gap: float
    violation: float
    violation_bound: float
    lam_hat: List[float]
    lam_star: List[float]
    passed: bool

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def raise_for_failure(self) -> None:
        if self.passed:
            return
        raise VerificationError(
            f"Guarantee check failed on '{self.scenario}' (eps={self.epsilon:g}): "
            f"gap {self.gap:.6e} vs bound {self.epsilon:.6e}, "
            f"violation {self.violation:.6e} vs bound {self.violation_bound:.6e}",
            measured={"gap": self.gap, "violation": self.violation},
            bounds={"gap": self.epsilon, "violation": self.violation_bound},
        )


def violation_bound(epsilon: float, lam_star: np.ndarray) -> float:
    norm = float(np.linalg.norm(lam_star))
    return epsilon * (norm + math.sqrt(norm**2 + 2.0))


def verify_theorem2(
    scenario: Scenario,
    epsilon: float,
    reference_factor: float = 100.0,
    approx: Optional[ConvexApprox] = None,
    pertone: str = "lbfgsb",
    rtol: float = 1e-9,
) -> TheoremCheck:
    """Run the improved scheme with the formulaic parameters and check both bounds."""
    approx = approx or build_approx(scenario, scenario.flat_allocation())
    schedule = smoothing_schedule(scenario, epsilon)
    config = SolverConfig(
        solver="improved-convex",
        epsilon=epsilon,
        i_max=schedule.i_max,
        i_max_floor=0,
        pertone=pertone,  # type: ignore[arg-type]
        primal="averaged",
    )
    logger.info(
        f"📊 Checking guarantees on '{scenario.name}' with eps={epsilon:g}, "
        f"i_max={schedule.i_max}"
    )
    report = solve_improved(scenario, config, approx, log_outcome=False)

    reference_eps = epsilon / reference_factor
    reference_schedule = smoothing_schedule(scenario, reference_eps)
    reference = solve_improved(
        scenario,
        config.model_copy(update={"epsilon": reference_eps, "i_max": reference_schedule.i_max}),
        approx,
        log_outcome=False,
    )

    s_hat = report.allocation
    dual = dual_value(scenario, report.lam, ProxConfig.off(), ToneSolver("lbfgsb"), approx)
    primal = float(np.sum(surrogate_values(approx, s_hat.power)))
    gap = dual - primal
    residual = s_hat.total_power - scenario.power_budget
    violation = float(np.linalg.norm(np.maximum(residual, 0.0)))
    bound = violation_bound(epsilon, reference.lam)
    slack = rtol * max(1.0, abs(dual))
    passed = gap <= epsilon + slack and violation <= bound * (1 + rtol)

    check = TheoremCheck(
        scenario=scenario.name,
        epsilon=epsilon,
        i_max=schedule.i_max,
        smoothness_c=schedule.c,
        lipschitz=schedule.lipschitz,
        gap=gap,
        violation=violation,
        violation_bound=bound,
        lam_hat=[float(x) for x in report.lam],
        lam_star=[float(x) for x in reference.lam],
        passed=passed,
    )
    if passed:
        logger.info(f"✅ gap {gap:.3e} <= {epsilon:.3e}, violation {violation:.3e} <= {bound:.3e}")
    else:
        logger.warning(f"⚠️ guarantee check failed: gap {gap:.3e}, violation {violation:.3e}")
    return check
