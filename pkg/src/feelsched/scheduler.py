"""Joint device selection and OFDMA bandwidth allocation.

``schedule_das`` splits the problem in two: a greedy knapsack-style selection
that trades diversity against estimated energy and latency (Sub1), and a convex
bandwidth allocation for the chosen set that trades round time against upload
energy (Sub2).  Baselines (age-based, random, all devices) and an exhaustive
oracle for small populations live here too.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import lambertw

from .radio import LN2, DeviceRadioState, RadioParams, rate_from_snr, snr_coefficient, training_time

ORACLE_MAX_DEVICES = 12


class InfeasibleScheduleError(RuntimeError):
    """No decision satisfies the constraints (zero-rate device, bandwidth budget, too few devices)."""


@dataclass(frozen=True)
class Device:
    """What the scheduler needs to know about one device in the current round."""

    device_id: int
    gain_sq: float
    power_w: float
    train_time_s: float
    dataset_size: int = 0

    @classmethod
    def from_state(cls, device_id: int, state: DeviceRadioState, dataset_size: int, epochs: int = 1):
        return cls(
            device_id,
            state.gain_sq,
            state.power_w,
            training_time(epochs, dataset_size, state),
            dataset_size,
        )


@dataclass(frozen=True)
class SchedulerConfig:
    lambda_E: float = 0.25
    lambda_T: float = 0.25
    lambda_I: float = 0.5
    rho: float = 0.5
    min_devices: int = 1
    max_devices: int | None = None
    tolerance: float = 1e-6
    # Round deadline defining the selection knapsack: a device weighs the bandwidth share it
    # needs to finish by this time, and devices that cannot make it alone are dropped.
    deadline_s: float | None = 0.3
    # "greedy" adds a device only if the joint objective improves; "oneshot" takes every fitting positive score.
    selection: str = "greedy"
    # Local search after the greedy pass: swaps pair this many best-scored unselected devices
    # with as many worst-scored selected ones; 0 disables the refinement.
    refine_pool: int = 4
    # Fixed selection size for the abs/random baselines (falls back to max_devices, then min_devices).
    select_count: int | None = None

    def __post_init__(self):
        lams = (self.lambda_E, self.lambda_T, self.lambda_I)
        if min(lams) < 0 or max(lams) == 0:
            raise ValueError("lambda weights must be non-negative and not all zero")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.min_devices < 1:
            raise ValueError("min_devices must be >= 1")
        if self.max_devices is not None and self.max_devices < self.min_devices:
            raise ValueError("max_devices must be >= min_devices")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.selection not in ("greedy", "oneshot"):
            raise ValueError("selection must be 'greedy' or 'oneshot'")

    @property
    def baseline_count(self) -> int:
        if self.select_count is not None:
            return self.select_count
        if self.max_devices is not None:
            return self.max_devices
        return self.min_devices


@dataclass
class BandwidthAllocation:
    alpha: np.ndarray  # per selected device, same order as the input
    predicted_T: float
    energy: np.ndarray  # J per selected device
    completion: np.ndarray  # t_train + t_up per selected device
    objective: float  # rho*T + (1-rho)*sum(E)


@dataclass
class ScheduleDecision:
    device_ids: np.ndarray
    selection: np.ndarray  # bool, one flag per device
    alpha: np.ndarray
    predicted_T: float
    energy: np.ndarray  # J, zero for unselected devices
    objective: float  # joint scalarized objective (higher is better)
    sub2_objective: float
    skipped: int = 0  # devices filtered as unschedulable

    @property
    def selected_ids(self) -> list[int]:
        return [int(i) for i in self.device_ids[self.selection]]

    def to_dict(self) -> dict:
        return {
            "selected": self.selected_ids,
            "alpha": [float(a) for a in self.alpha],
            "predicted_T": float(self.predicted_T),
            "energy": [float(e) for e in self.energy],
            "objective": float(self.objective),
            "sub2_objective": float(self.sub2_objective),
        }


# ---------------------------------------------------------------------------
# Rate inversions

def _upload_time(alpha, snr, B, s):
    rate = rate_from_snr(alpha, snr, B)
    with np.errstate(divide="ignore"):
        return np.where(rate > 0, s / np.where(rate > 0, rate, 1.0), np.inf)


def _q_scaled(x):
    # (ln(1+x) - x/(1+x)) / x^2 = sum_j (-1)^j (j+1)/(j+2) x^j for small x
    out = np.zeros_like(x)
    for j in range(7, -1, -1):
        out = out * x + (-1) ** j * (j + 1) / (j + 2)
    return out


def _q_series(x):
    return _q_scaled(x) * x * x


def _q(x):
    out = np.log1p(x) - x / (1 + x)
    small = x < 1e-3
    if small.any():
        out[small] = _q_series(x[small])
    return out


def _h(x):
    """Scaled marginal upload time: -d(t_up)/d(alpha) = s*ln2/(B*snr^2) * h(snr/alpha)."""
    x = np.asarray(x, dtype=float)
    L = np.log1p(x)
    return x * x * _q(x) / (L * L)


def _log_h(u):
    """log h(e^u), stable far below the underflow point of h itself."""
    x = np.exp(u)
    small = x < 1e-3
    if small.any():
        log_q = np.empty_like(x)
        log_q[~small] = np.log(_q(x[~small]))
        log_q[small] = 2 * u[small] + np.log(_q_scaled(x[small]))
    else:
        log_q = np.log(np.log1p(x) - x / (1 + x))
    return 2 * u + log_q - 2 * np.log(np.log1p(x))


_U_GRID = np.linspace(math.log(1e-12), math.log(1e16), 40001)
_LOGH_GRID = _log_h(_U_GRID)


def _h_inv(z, with_slope=False):
    """Inverse of the increasing function h on (0, inf), vectorized.

    With ``with_slope`` also returns d ln h / d ln x at the solution.
    """
    z = np.asarray(z, dtype=float)
    lz = np.log(z)
    u = np.interp(lz, _LOGH_GRID, _U_GRID)
    # small-x asymptote below the table: h ~ x^2/2
    u = np.where(lz < _LOGH_GRID[0], 0.5 * (lz + math.log(2.0)), u)
    # the table is fine enough that a single Newton step reaches ~1e-12
    x = np.exp(u)
    L = np.log1p(x)
    q_x2 = _q(x) / (x * x)
    small = x < 1e-3
    if small.any():
        q_x2[small] = _q_scaled(x[small])
    slope = 2 + 1.0 / ((1 + x) ** 2 * q_x2) - 2 * x / (L * (1 + x))
    u = u - (_log_h(u) - lz) / slope
    if with_slope:
        return np.exp(u), slope
    return np.exp(u)


def _marginal_upload_time(alpha, snr, B, s):
    return s * LN2 / (B * snr * snr) * _h(snr / alpha)


def _alpha_for_rate(snr, required_rate, B):
    """Smallest alpha with rate(alpha) >= required_rate (may exceed 1; inf if unreachable)."""
    snr = np.asarray(snr, dtype=float)
    R = np.asarray(required_rate, dtype=float)
    snr, R = np.broadcast_arrays(snr, R)
    q = R * LN2 / (snr * B)
    out = np.full(snr.shape, np.inf)
    ok = (q > 0) & (q < 1)
    if np.any(ok):
        qq = q[ok]
        # ln(1+x)/x = q  <=>  1+x = -W_{-1}(-q e^{-q}) / q
        y = -lambertw(-qq * np.exp(-qq), k=-1).real / qq
        alpha = snr[ok] / np.maximum(y - 1.0, 1e-300)
        for _ in range(4):
            r = rate_from_snr(alpha, snr[ok], B)
            x = snr[ok] / alpha
            dr = B / LN2 * _q(x)
            alpha = np.maximum(alpha - (r - R[ok]) / dr, alpha * 0.5)
        out[ok] = alpha
    out[R <= 0] = 0.0
    return out


def min_bandwidth_for_deadline(device: Device, params: RadioParams, deadline_T: float, tolerance: float = 1e-12):
    """Smallest bandwidth share meeting ``train + upload <= deadline_T``, by bisection.

    Returns None when the deadline cannot be met even with the whole band.
    """
    if deadline_T <= 0:
        raise ValueError("deadline must be positive")
    slack = deadline_T - device.train_time_s
    if slack <= 0 or device.gain_sq <= 0:
        return None
    snr = float(snr_coefficient(device.gain_sq, device.power_w, params))
    required = params.model_size_bits / slack
    B = params.bandwidth_hz
    if rate_from_snr(1.0, snr, B) < required:
        return None
    lo, hi = 0.0, 1.0
    while hi - lo > tolerance * hi:
        mid = 0.5 * (lo + hi)
        if rate_from_snr(mid, snr, B) >= required:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Sub2: bandwidth allocation for a fixed set


class _Sub2:
    """Minimize rho*T + (1-rho)*sum(P_k t_up,k) over alpha for one selected set."""

    def __init__(self, t_train, snr, power, B, s, rho, budget=1.0):
        self.t = np.asarray(t_train, dtype=float)
        self.snr = np.asarray(snr, dtype=float)
        self.P = np.asarray(power, dtype=float)
        self.B, self.s, self.rho, self.c = B, s, rho, budget
        self.n = self.t.size
        self._log_mu = None
        if rho < 1:
            self._zscale = B * self.snr**2 / (s * LN2 * (1 - rho) * self.P)

    def upload(self, alpha):
        return _upload_time(alpha, self.snr, self.B, self.s)

    def alpha_min(self, T):
        slack = T - self.t
        out = np.full(self.n, np.inf)
        ok = slack > 0
        out[ok] = _alpha_for_rate(self.snr[ok], self.s / slack[ok], self.B)
        return out

    def _psi(self, mu):
        # share at which the weighted marginal energy equals mu
        return self.snr / _h_inv(mu * self._zscale)

    def _weighted_marginal(self, alpha):
        return (1 - self.rho) * self.P * _marginal_upload_time(alpha, self.snr, self.B, self.s)

    def energy_split(self, floor):
        """Energy-optimal alpha >= floor with sum(alpha) = budget and alpha <= 1."""
        floor = np.minimum(floor, 1.0)
        if self.c >= self.n:
            return np.ones(self.n), 0.0
        if floor.sum() >= self.c or self.rho == 1.0:
            return floor * (self.c / floor.sum()), math.inf

        def total(log_mu):
            x, dlnh = _h_inv(math.exp(log_mu) * self._zscale, with_slope=True)
            psi = self.snr / x
            alpha = np.minimum(1.0, np.maximum(floor, psi))
            free = (psi > floor) & (psi < 1.0)
            return alpha.sum() - self.c, -float(np.sum(psi[free] / dlnh[free]))

        # Bracket for log(mu).  Below the smallest marginal at alpha = 1 every share clips to 1;
        # above the largest marginal at floor + an even split of the residual the shares fit.
        residual = (self.c - floor.sum()) / self.n
        lo = math.log(float(self._weighted_marginal(np.ones(self.n)).min()))
        hi = math.log(float(self._weighted_marginal(np.maximum(floor, residual)).max()))
        log_mu = self._log_mu if self._log_mu is not None and lo < self._log_mu < hi else 0.5 * (lo + hi)
        # safeguarded Newton on log(mu); total() is decreasing
        for _ in range(200):
            g, dg = total(log_mu)
            if g > 0:
                lo = log_mu
            else:
                hi = log_mu
            if abs(g) <= 1e-14 * self.c or hi - lo < 1e-13:
                break
            step = log_mu - g / dg if dg < 0 else math.nan
            log_mu = step if lo < step < hi else 0.5 * (lo + hi)
        self._log_mu = log_mu
        mu = math.exp(log_mu)
        alpha = np.minimum(1.0, np.maximum(floor, self._psi(mu)))
        return alpha, mu

    def slope(self, T):
        """d/dT of the partially minimized objective (envelope theorem)."""
        floor = self.alpha_min(T)
        alpha, mu = self.energy_split(floor)
        if not math.isfinite(mu):
            return -math.inf
        tight = floor >= alpha * (1 - 1e-12)
        marginal = _marginal_upload_time(alpha, self.snr, self.B, self.s)
        nu = mu / marginal[tight] - (1 - self.rho) * self.P[tight]
        return self.rho - float(np.maximum(nu, 0.0).sum())

    def _feasible_T(self):
        t_full = self.t + self.upload(np.ones(self.n))
        lo = float(t_full.max())
        if self.alpha_min(lo).sum() <= self.c:
            return lo
        share = min(1.0, self.c / self.n)
        hi = float((self.t + self.upload(np.full(self.n, share))).max())
        if self.alpha_min(hi).sum() <= self.c:
            return brentq(lambda T: self.alpha_min(T).sum() - self.c, lo, hi, xtol=1e-15, rtol=1e-14)
        return hi

    def solve(self) -> BandwidthAllocation:
        if self.n == 1:
            alpha = np.array([min(1.0, self.c)])
            return self._finish(alpha)
        T_feas = self._feasible_T()
        if self.rho == 1.0:
            return self._finish(self._at(T_feas))
        alpha_E, _ = self.energy_split(np.zeros(self.n))
        T_E = float((self.t + self.upload(alpha_E)).max())
        if self.rho == 0.0 or T_E <= T_feas:
            return self._finish(alpha_E if T_E >= T_feas else self._at(T_feas))
        T_lo = T_feas * (1 + 1e-12)
        if self.slope(T_lo) >= 0:
            return self._finish(self._at(T_feas))
        if self.slope(T_E) <= 0:
            return self._finish(alpha_E)
        T_star = brentq(self.slope, T_lo, T_E, xtol=1e-15, rtol=1e-10)
        return self._finish(self._at(T_star))

    def _at(self, T):
        alpha, _ = self.energy_split(self.alpha_min(T))
        return alpha

    def _finish(self, alpha):
        alpha = np.minimum(np.asarray(alpha, dtype=float), 1.0)
        if alpha.sum() > self.c:
            alpha = alpha * (self.c / alpha.sum())
        up = self.upload(alpha)
        completion = self.t + up
        energy = self.P * up
        T = float(completion.max())
        obj = self.rho * T + (1 - self.rho) * float(energy.sum())
        return BandwidthAllocation(alpha, T, energy, completion, obj)


def sub2_objective(alpha, devices: Sequence[Device], params: RadioParams, rho: float) -> float:
    """rho*T + (1-rho)*sum(E) for an explicit allocation (inf if any alpha is 0)."""
    t = np.array([d.train_time_s for d in devices])
    snr = snr_coefficient(np.array([d.gain_sq for d in devices]), np.array([d.power_w for d in devices]), params)
    up = _upload_time(np.asarray(alpha, dtype=float), snr, params.bandwidth_hz, params.model_size_bits)
    P = np.array([d.power_w for d in devices])
    return rho * float((t + up).max()) + (1 - rho) * float((P * up).sum())


def solve_sub2(
    devices: Sequence[Device],
    params: RadioParams,
    rho: float = 0.5,
    tolerance: float = 1e-6,
    budget: float = 1.0,
) -> BandwidthAllocation:
    """Optimal bandwidth shares for an already selected set.

    ``budget`` relaxes sum(alpha) <= 1 to sum(alpha) <= budget; it exists for testing.
    """
    if len(devices) == 0:
        raise ValueError("selection must be non-empty")
    gains = np.array([d.gain_sq for d in devices], dtype=float)
    if np.any(gains <= 0):
        bad = [d.device_id for d in devices if d.gain_sq <= 0]
        raise InfeasibleScheduleError(f"zero-rate devices in selection: {bad}")
    power = np.array([d.power_w for d in devices], dtype=float)
    problem = _Sub2(
        [d.train_time_s for d in devices],
        snr_coefficient(gains, power, params),
        power,
        params.bandwidth_hz,
        params.model_size_bits,
        rho,
        budget,
    )
    alloc = problem.solve()
    if alloc.alpha.sum() > budget * (1 + tolerance) or not np.isfinite(alloc.predicted_T):
        raise InfeasibleScheduleError("bandwidth budget cannot accommodate the selection")
    return alloc


# ---------------------------------------------------------------------------
# Sub1: selection


@dataclass(frozen=True)
class CostEstimates:
    """Per-device quantities Sub1 works with, computed before any allocation exists."""

    feasible: np.ndarray  # bool: usable channel and, with a deadline, able to meet it alone
    energy: np.ndarray  # J under an equal bandwidth split, inf if infeasible
    completion: np.ndarray  # s under an equal bandwidth split, inf if infeasible
    weight: np.ndarray  # knapsack weight: bandwidth share needed to meet the deadline (0 without one)

    @property
    def energy_scale(self) -> float:
        e = self.energy[self.feasible]
        return float(e.max()) if e.size else 1.0

    @property
    def time_scale(self) -> float:
        t = self.completion[self.feasible]
        return float(t.max()) if t.size else 1.0

    def normalized(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.where(self.feasible, self.energy, 0.0)
        t = np.where(self.feasible, self.completion, 0.0)
        es, ts = self.energy_scale, self.time_scale
        return (e / es if es > 0 else e), (t / ts if ts > 0 else t)


def estimate_costs(devices: Sequence[Device], params: RadioParams, config: SchedulerConfig) -> CostEstimates:
    """Equal-split energy/time estimates plus per-device deadline filtering and knapsack weights."""
    t = np.array([d.train_time_s for d in devices], dtype=float)
    gains = np.array([d.gain_sq for d in devices], dtype=float)
    power = np.array([d.power_w for d in devices], dtype=float)
    snr = snr_coefficient(gains, power, params)
    B, s = params.bandwidth_hz, params.model_size_bits
    feasible = gains > 0
    weight = np.zeros(t.shape)
    if config.deadline_s is not None:
        slack = config.deadline_s - t
        ok = feasible & (slack > 0)
        need = np.full(t.shape, np.inf)
        need[ok] = _alpha_for_rate(snr[ok], s / slack[ok], B)
        feasible = ok & (need <= 1.0)
        weight = np.where(feasible, need, np.inf)
    n = int(feasible.sum())
    if n == 0:
        inf = np.full(t.shape, np.inf)
        return CostEstimates(feasible, inf, inf, weight)
    up = np.where(feasible, _upload_time(np.full(t.shape, 1.0 / n), snr, B, s), np.inf)
    return CostEstimates(feasible, power * up, t + up, weight)


def sub1_scores(index, costs: CostEstimates, config: SchedulerConfig) -> np.ndarray:
    """lambda_I*I - lambda_E*E_hat - lambda_T*t_hat; -inf for unschedulable devices."""
    e_hat, t_hat = costs.normalized()
    score = config.lambda_I * np.asarray(index, dtype=float) - config.lambda_E * e_hat - config.lambda_T * t_hat
    return np.where(costs.feasible, score, -np.inf)


def _ranking(scores, device_ids) -> list[int]:
    # descending score, ties by ascending device id
    return sorted(range(len(scores)), key=lambda k: (-scores[k], device_ids[k]))


def _check_enough(costs: CostEstimates, config: SchedulerConfig):
    n_feasible = int(costs.feasible.sum())
    if n_feasible < config.min_devices:
        raise InfeasibleScheduleError(
            f"only {n_feasible} schedulable devices, need at least {config.min_devices} "
            f"(short by {config.min_devices - n_feasible})"
        )


def solve_sub1(index, costs: CostEstimates, config: SchedulerConfig, device_ids=None, accept=None) -> np.ndarray:
    """Greedy knapsack selection in descending score order.

    A device is taken when its bandwidth weight still fits (sum of weights <= 1) and
    either its score is positive or, when given, ``accept(current, candidate)`` agrees.
    The first N fitting devices are always taken; at most max_devices are selected.
    """
    index = np.asarray(index, dtype=float)
    if device_ids is None:
        device_ids = list(range(index.size))
    _check_enough(costs, config)
    scores = sub1_scores(index, costs, config)
    order = [k for k in _ranking(scores, device_ids) if costs.feasible[k]]
    cap = config.max_devices if config.max_devices is not None else len(order)
    chosen: list[int] = []
    load = 0.0
    for k in order:
        if len(chosen) >= cap:
            break
        forced = len(chosen) < config.min_devices
        if not forced and accept is None and scores[k] <= 0:
            break
        if load + costs.weight[k] > 1.0:
            continue
        if forced or accept is None or accept(chosen, k):
            chosen.append(k)
            load += costs.weight[k]
    if len(chosen) < config.min_devices:
        raise InfeasibleScheduleError(
            f"bandwidth budget fits only {len(chosen)} devices, need {config.min_devices}"
        )
    x = np.zeros(index.size, dtype=bool)
    x[chosen] = True
    return x


# ---------------------------------------------------------------------------
# Joint objective shared by DAS and the oracle


@dataclass(frozen=True)
class ObjectiveScale:
    """Population-level reference values that make the joint objective unitless."""

    energy: float
    time: float

    @classmethod
    def from_costs(cls, costs: CostEstimates) -> "ObjectiveScale":
        return cls(costs.energy_scale, costs.time_scale)


def joint_objective(index_sel, alloc: BandwidthAllocation, scale: ObjectiveScale, config: SchedulerConfig) -> float:
    """lambda_I*sum(I) - lambda_E*sum(E)/E_ref - lambda_T*T/T_ref (to be maximized)."""
    return (
        config.lambda_I * float(np.sum(index_sel))
        - config.lambda_E * float(alloc.energy.sum()) / scale.energy
        - config.lambda_T * alloc.predicted_T / scale.time
    )


def _decision(devices, chosen, alloc, objective, skipped=0) -> ScheduleDecision:
    K = len(devices)
    x = np.zeros(K, dtype=bool)
    alpha = np.zeros(K)
    energy = np.zeros(K)
    chosen = list(chosen)
    x[chosen] = True
    alpha[chosen] = alloc.alpha
    energy[chosen] = alloc.energy
    return ScheduleDecision(
        np.array([d.device_id for d in devices]),
        x,
        alpha,
        alloc.predicted_T,
        energy,
        objective,
        alloc.objective,
        skipped,
    )


class _Evaluator:
    """Joint objective of a subset, caching the Sub2 solution per subset."""

    def __init__(self, devices, index, params, config, scale):
        self.devices, self.index = devices, np.asarray(index, dtype=float)
        self.params, self.config, self.scale = params, config, scale
        self.cache: dict[tuple, tuple[float, BandwidthAllocation]] = {}

    def __call__(self, subset) -> tuple[float, BandwidthAllocation]:
        key = tuple(sorted(subset))
        if key not in self.cache:
            alloc = solve_sub2([self.devices[k] for k in key], self.params, self.config.rho, self.config.tolerance)
            value = joint_objective(self.index[list(key)], alloc, self.scale, self.config)
            self.cache[key] = (value, alloc)
        return self.cache[key]

    def improves(self, chosen, k) -> bool:
        if not chosen:
            return True
        return self(chosen + [k])[0] > self(chosen)[0]


def schedule_das(devices: Sequence[Device], index, params: RadioParams, config: SchedulerConfig) -> ScheduleDecision:
    """Data-aware scheduling: Sub1 selection followed by Sub2 bandwidth allocation."""
    K = len(devices)
    if K < config.min_devices:
        raise InfeasibleScheduleError(f"{K} devices cannot satisfy minimum {config.min_devices}")
    ids = [d.device_id for d in devices]
    costs = estimate_costs(devices, params, config)
    evaluate = _Evaluator(devices, index, params, config, ObjectiveScale.from_costs(costs))
    accept = evaluate.improves if config.selection == "greedy" else None
    x = solve_sub1(index, costs, config, ids, accept=accept)
    chosen = list(np.flatnonzero(x))
    if config.selection == "greedy" and config.refine_pool > 0:
        scores = sub1_scores(index, costs, config)
        chosen = _refine(chosen, _ranking(scores, ids), costs, config, evaluate)
    value, alloc = evaluate(chosen)
    return _decision(devices, sorted(chosen), alloc, value, int((~costs.feasible).sum()))


def _best_move(moves, best, evaluate):
    found = None
    for move in moves:
        value, _ = evaluate(move)
        if value > best * (1 + 1e-12) + 1e-12 and (found is None or value > found[0]):
            found = (value, sorted(move))
    return found


def _refine(chosen, order, costs: CostEstimates, config: SchedulerConfig, evaluate, max_passes: int = 10):
    """Best-improvement local search over single drops, adds and swaps."""
    cap = config.max_devices if config.max_devices is not None else len(order)
    chosen = sorted(chosen)
    best, _ = evaluate(chosen)
    for _ in range(max_passes):
        inside = set(chosen)
        outside = [k for k in order if costs.feasible[k] and k not in inside]
        load = float(costs.weight[chosen].sum())
        moves = []
        if len(chosen) > config.min_devices:
            moves += [[j for j in chosen if j != drop] for drop in chosen]
        if len(chosen) < cap:
            moves += [chosen + [k] for k in outside if load + costs.weight[k] <= 1.0]
        improved = _best_move(moves, best, evaluate)
        if improved is None:
            # swaps are the expensive neighbourhood, so only try them once drops and adds stall
            weakest = [j for j in reversed(order) if j in inside][: config.refine_pool]
            swaps = [
                [j for j in chosen if j != drop] + [k]
                for k in outside[: config.refine_pool]
                for drop in weakest
                if load - costs.weight[drop] + costs.weight[k] <= 1.0
            ]
            improved = _best_move(swaps, best, evaluate)
        if improved is None:
            break
        best, chosen = improved
    return chosen


def brute_force_oracle(devices: Sequence[Device], index, params: RadioParams, config: SchedulerConfig) -> ScheduleDecision:
    """Best subset under the joint objective by exhaustive enumeration (K <= 12).

    Enumerates every subset of schedulable devices with N <= |S| <= max_devices whose
    knapsack weights fit the bandwidth budget, each allocated by Sub2.
    """
    K = len(devices)
    if K > ORACLE_MAX_DEVICES:
        raise ValueError(f"oracle limited to {ORACLE_MAX_DEVICES} devices, got {K}")
    costs = estimate_costs(devices, params, config)
    _check_enough(costs, config)
    evaluate = _Evaluator(devices, index, params, config, ObjectiveScale.from_costs(costs))
    feasible = [k for k in range(K) if costs.feasible[k]]
    cap = config.max_devices if config.max_devices is not None else K
    best = None
    for size in range(config.min_devices, min(cap, len(feasible)) + 1):
        # combinations() is lexicographic, so strict '>' keeps the smallest subset on ties
        for subset in itertools.combinations(feasible, size):
            if costs.weight[list(subset)].sum() > 1.0:
                continue
            value, alloc = evaluate(subset)
            if best is None or value > best[0]:
                best = (value, subset, alloc)
    if best is None:
        raise InfeasibleScheduleError("no subset of the required size fits the bandwidth budget")
    value, subset, alloc = best
    return _decision(devices, subset, alloc, value, K - len(feasible))


# ---------------------------------------------------------------------------
# Baselines


def _selection_mask(K, chosen):
    x = np.zeros(K, dtype=bool)
    x[list(chosen)] = True
    return x


def schedule_abs(ages, m: int, rng: np.random.Generator) -> np.ndarray:
    """Pick the m devices with the largest log(1 + age); ties broken at random."""
    ages = np.asarray(ages, dtype=float)
    K = ages.size
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > K:
        raise ValueError(f"cannot select {m} of {K} devices")
    priority = np.log1p(ages)
    tiebreak = rng.permutation(K)
    order = np.lexsort((tiebreak, -priority))
    return _selection_mask(K, order[:m])


def schedule_random(K: int, m: int, rng: np.random.Generator) -> np.ndarray:
    if not 1 <= m <= K:
        raise ValueError(f"cannot select {m} of {K} devices")
    return _selection_mask(K, rng.choice(K, size=m, replace=False))


def schedule_all(devices: Sequence[Device]) -> np.ndarray:
    """Every device with a usable channel."""
    return np.array([d.gain_sq > 0 for d in devices], dtype=bool)


def allocate(devices: Sequence[Device], selection, index, params: RadioParams, config: SchedulerConfig) -> ScheduleDecision:
    """Sub2 bandwidth for a selection made elsewhere (baselines), as a full decision."""
    selection = np.asarray(selection, dtype=bool)
    usable = selection & np.array([d.gain_sq > 0 for d in devices])
    chosen = list(np.flatnonzero(usable))
    if len(chosen) < config.min_devices:
        raise InfeasibleScheduleError(f"{len(chosen)} usable devices selected, need {config.min_devices}")
    alloc = solve_sub2([devices[k] for k in chosen], params, config.rho, config.tolerance)
    scale = ObjectiveScale.from_costs(estimate_costs(devices, params, config))
    value = joint_objective(np.asarray(index, dtype=float)[chosen], alloc, scale, config)
    return _decision(devices, chosen, alloc, value, int((selection & ~usable).sum()))
