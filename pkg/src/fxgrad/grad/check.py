"""
Three-way gradient comparison on effects with a closed-form Jacobian.
"""
from __future__ import annotations

import itertools
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from ..errors import ContractError, DomainError
from ..fx.base import BlackboxFx, ParamVector, as_param_vector
from ..fx.replicas import ReplicaSet
from ..telemetry import trace
from .estimators import fd_forward, spsa_forward
from .perturbation import slot_rng

logger = logging.getLogger(__name__)

MAX_PATTERN_PARAMS = 10


def relative_error(estimate: np.ndarray, reference: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    return np.abs(estimate - reference) / np.maximum(np.abs(reference), floor)


class GradCheckResult(BaseModel):
    names: List[str]
    grad_true: List[float]
    grad_fd: List[float]
    grad_spsa_mean: List[float]
    grad_spsa_raw: Optional[List[float]] = None
    n_seeds: int
    epsilon: float
    fd_tol: float = 1e-4
    spsa_tol: float = 0.05

    @property
    def rel_err_fd(self) -> List[float]:
        return relative_error(np.array(self.grad_fd), np.array(self.grad_true)).tolist()

    @property
    def rel_err_spsa(self) -> List[float]:
        return relative_error(np.array(self.grad_spsa_mean), np.array(self.grad_true)).tolist()

    @property
    def fd_passed(self) -> bool:
        return all(e < self.fd_tol for e in self.rel_err_fd)

    @property
    def spsa_passed(self) -> bool:
        return all(e < self.spsa_tol for e in self.rel_err_spsa)

    @property
    def passed(self) -> bool:
        return self.fd_passed and self.spsa_passed

    def rows(self) -> List[List[str]]:
        out = [["param", "analytic", "fd", "spsa_mean", "rel_err_fd", "rel_err_spsa", "status"]]
        for i, name in enumerate(self.names):
            ok = self.rel_err_fd[i] < self.fd_tol and self.rel_err_spsa[i] < self.spsa_tol
            out.append([
                name,
                f"{self.grad_true[i]:.9g}",
                f"{self.grad_fd[i]:.9g}",
                f"{self.grad_spsa_mean[i]:.9g}",
                f"{self.rel_err_fd[i]:.3e}",
                f"{self.rel_err_spsa[i]:.3e}",
                "PASS" if ok else "FAIL",
            ])
        return out


def spsa_pattern_mean(
    factory: Callable[[], BlackboxFx],
    x: np.ndarray,
    theta: Sequence[float],
    v: Sequence[float],
    epsilon: float,
) -> ParamVector:
    """Exact expectation of the SPSA estimate: average over all 2^P sign patterns."""
    r = ReplicaSet(factory)
    n_params = r.n_params
    if n_params > MAX_PATTERN_PARAMS:
        raise DomainError(f"pattern enumeration is limited to P <= {MAX_PATTERN_PARAMS}, got {n_params}")
    vec = as_param_vector(theta, n_params)
    total = np.zeros(n_params)
    for signs in itertools.product((-1.0, 1.0), repeat=n_params):
        r.reset()
        tape = spsa_forward(r, x, vec, None, epsilon, delta=np.array(signs))  # type: ignore[arg-type]
        total += tape.vjp(v)
    return total / float(2 ** n_params)


@trace("gradcheck")
def analytic_vjp_check(
    factory: Callable[[], BlackboxFx],
    x: np.ndarray,
    theta: Sequence[float],
    v: Sequence[float],
    epsilon: float = 1e-3,
    n_seeds: int = 1000,
    seed: int = 0,
    control_variate: bool = True,
) -> GradCheckResult:
    """
    Compare FD, the SPSA mean over ``n_seeds`` draws and the closed form.

    With ``control_variate`` every draw subtracts its cross terms
    ``delta_i * delta_j * g_j`` (j != i) evaluated on the FD gradient. That
    correction has zero mean, so the average is still an unbiased SPSA
    estimate; its residual spread is O(eps^2) instead of ~g_j / sqrt(n_seeds).
    ``grad_spsa_raw`` keeps the uncorrected mean.
    """
    reference = factory()
    if not hasattr(reference, "analytic_vjp"):
        raise ContractError(f"effect '{reference.effect_id}' has no closed-form Jacobian")
    vec = as_param_vector(theta, reference.n_params)
    grad_true = np.asarray(reference.analytic_vjp(x, vec, v), dtype=np.float64)

    fd_set = ReplicaSet(factory, n_pairs=reference.n_params)
    grad_fd = fd_forward(fd_set, x, vec, epsilon).vjp(v)

    spsa_set = ReplicaSet(factory)
    raw = np.zeros(reference.n_params)
    correction = np.zeros(reference.n_params)
    for s in range(n_seeds):
        spsa_set.reset()
        tape = spsa_forward(spsa_set, x, vec, slot_rng(seed, 0, s), epsilon)
        raw += tape.vjp(v)
        # delta * (delta . g) - g == the j != i cross terms, since delta_i**2 == 1
        correction += tape.delta * float(np.dot(tape.delta, grad_fd)) - grad_fd
    grad_raw = raw / n_seeds
    grad_spsa = grad_raw - correction / n_seeds if control_variate else grad_raw

    result = GradCheckResult(
        names=reference.param_specs.names,
        grad_true=grad_true.tolist(),
        grad_fd=grad_fd.tolist(),
        grad_spsa_mean=grad_spsa.tolist(),
        grad_spsa_raw=grad_raw.tolist(),
        n_seeds=n_seeds,
        epsilon=epsilon,
    )
    logger.info(
        "gradcheck %s: fd %s, spsa %s (%d seeds, control variate %s)",
        reference.effect_id,
        "PASS" if result.fd_passed else "FAIL",
        "PASS" if result.spsa_passed else "FAIL",
        n_seeds,
        "on" if control_variate else "off",
    )
    return result
