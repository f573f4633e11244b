"""Simultaneous fog parameter estimation from landmark observations.

Given per-landmark sequences of (distance, radiance) pairs, jointly estimate
the scattering coefficient beta, the atmospheric-light radiance l_inf and
one clear radiance lc per landmark by bounded robust least squares on

    residual = L_obs - [(lc - l_inf) * exp(-beta * d) + l_inf]

The solve runs in two stages: a Huber stage over all observations with
confidence weights w = |lc_ref - l_inf_ref| * (inlier_count + 1), then a
square-loss stage restricted to the stage-1 inliers with uniform weights.
Weights are fixed before each stage-1 solve and never change inside a solve.
Box bounds come from per-landmark radiance-over-distance slopes, and
initialization reuses previous estimates when the caller keeps state across
updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateDataError, MapFormatError, NotEnoughDataError
from .localmap import ObservationSet, SelectionThresholds, check_sufficiency
from .optimizer import ResidualProblem, SolveOptions, SolveReport, solve
from .photometry import GammaMap, compress, expand
from .scattering import visibility_from_beta

DEFAULT_BETA_BOUNDS = (0.001, 0.2)
# geometric-mean-flavored midpoint of the default beta range, used cold
DEFAULT_BETA_INIT = 0.014


@dataclass(frozen=True)
class EstimatorConfig:
    xi_f: int = 4
    xi_k: int = 15
    eta: float = 2.0                    # intensity-per-meter slope threshold
    delta: float = 5.0                  # Huber width, in intensity levels
    beta_bounds: tuple[float, float] = DEFAULT_BETA_BOUNDS
    update_gate: float = 5.0            # meters travelled between updates
    two_stage: bool = True
    uniform_weights: bool = False
    solver: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if not (0 < self.beta_bounds[0] < self.beta_bounds[1]):
            raise ValueError("beta bounds must satisfy 0 < lower < upper")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @property
    def thresholds(self) -> SelectionThresholds:
        return SelectionThresholds(self.xi_f, self.xi_k)


@dataclass
class FogEstimate:
    beta: float
    l_inf: float
    lc: dict[int, float]

    @property
    def visibility(self) -> float:
        return visibility_from_beta(self.beta)


@dataclass
class EstimatorState:
    """Carried across sequential updates by one caller."""

    previous: Optional[FogEstimate] = None
    inlier_counts: dict[tuple[int, int], int] = field(default_factory=dict)
    last_update_position: Optional[float] = None

    def clone(self) -> "EstimatorState":
        prev = None
        if self.previous is not None:
            prev = FogEstimate(self.previous.beta, self.previous.l_inf,
                               dict(self.previous.lc))
        return EstimatorState(prev, dict(self.inlier_counts), self.last_update_position)


@dataclass
class Bounds:
    beta: tuple[float, float]
    l_inf: tuple[float, float]
    lc: dict[int, tuple[float, float]]

    def as_vectors(self, ids: list[int]) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.beta[0], self.l_inf[0]] + [self.lc[n][0] for n in ids])
        hi = np.array([self.beta[1], self.l_inf[1]] + [self.lc[n][1] for n in ids])
        return lo, hi


@dataclass
class EstimateResult:
    estimate: FogEstimate
    state: EstimatorState
    bounds: Bounds
    stage1: SolveReport
    stage2: Optional[SolveReport]
    inlier_fraction: float
    degraded: bool = False


def _extremal_obs(group):
    """Observations at the smallest and largest distance (stable order)."""
    ordered = sorted(group, key=lambda o: (o.distance, o.frame))
    return ordered[0], ordered[-1]


def derive_bounds(obs: ObservationSet, gmap: GammaMap,
                  eta: float = 2.0,
                  beta_bounds: tuple[float, float] = DEFAULT_BETA_BOUNDS) -> Bounds:
    """Box bounds from per-landmark intensity-over-distance slopes.

    A landmark whose intensity climbs with distance faster than ``eta``
    levels per meter is darker than the fog: its clear radiance is capped by
    the radiance seen at the nearest range, and the radiance at the farthest
    range is a lower-bound candidate for l_inf (the median of the candidates
    is used, an underestimate by construction). A steep negative slope bounds
    the clear radiance from below the same way. Flat landmarks get the
    neutral range of the gamma map.
    """
    lo_all = expand(gmap, 0.0)
    hi_all = expand(gmap, 255.0)
    lc_bounds: dict[int, tuple[float, float]] = {}
    candidates: list[float] = []
    far_radiances: list[float] = []
    for n in obs.landmark_ids:
        near, far = _extremal_obs(obs.groups[n])
        spread = far.distance - near.distance
        far_radiances.append(far.radiance)
        lo, hi = lo_all, hi_all
        if spread > 0:
            slope = (compress(gmap, far.radiance, clamp=True)
                     - compress(gmap, near.radiance, clamp=True)) / spread
            # noise can push observed radiances slightly out of the map's
            # range; clamp so the box stays ordered
            if slope > eta:
                hi = min(max(near.radiance, lo_all), hi_all)
                candidates.append(min(max(far.radiance, lo_all), hi_all))
            elif slope < -eta:
                lo = min(max(near.radiance, lo_all), hi_all)
        lc_bounds[n] = (lo, hi)
    if candidates:
        # A steep-slope landmark's far-range radiance sits below the haze
        # level, so the typical far-range radiance caps the bound; without
        # the cap a handful of gross outliers (the only points that can look
        # steep once everything is fog-washed) can squeeze the box above the
        # true value.
        l_inf_lo = min(float(np.median(candidates)),
                       float(np.median(far_radiances)))
    else:
        l_inf_lo = lo_all
    return Bounds(beta=beta_bounds, l_inf=(l_inf_lo, hi_all), lc=lc_bounds)


def initialize(obs: ObservationSet, state: EstimatorState, bounds: Bounds) -> np.ndarray:
    """Initial parameter vector [beta, l_inf, lc...], projected into bounds.

    Previous estimates are reused where available; otherwise beta starts at
    DEFAULT_BETA_INIT, l_inf at the median far-range radiance and each lc at
    the radiance observed at the nearest range.
    """
    ids = obs.landmark_ids
    prev = state.previous
    beta0 = prev.beta if prev is not None else DEFAULT_BETA_INIT
    if prev is not None:
        l_inf0 = prev.l_inf
    else:
        far_radiances = [_extremal_obs(obs.groups[n])[1].radiance for n in ids]
        l_inf0 = float(np.median(far_radiances))
    x = np.empty(2 + len(ids))
    x[0], x[1] = beta0, l_inf0
    for k, n in enumerate(ids):
        if prev is not None and n in prev.lc:
            x[2 + k] = prev.lc[n]
        else:
            x[2 + k] = _extremal_obs(obs.groups[n])[0].radiance
    lo, hi = bounds.as_vectors(ids)
    return np.clip(x, lo, hi)


def compute_weights(obs: ObservationSet, reference: FogEstimate,
                    inlier_counts: dict[tuple[int, int], int]) -> dict[tuple[int, int], float]:
    """Stage-1 confidence weights per (frame, landmark) observation."""
    weights = {}
    for n, group in obs.groups.items():
        contrast = abs(reference.lc[n] - reference.l_inf)
        for o in group:
            weights[(o.frame, n)] = contrast * (inlier_counts.get((o.frame, n), 0) + 1)
    return weights


def huber_delta_radiance(gmap: GammaMap, delta_intensity: float) -> float:
    """Huber width mapped from intensity levels to the radiance domain,
    measured across the middle of the intensity range."""
    mid = 127.5
    return (expand(gmap, mid + delta_intensity / 2.0)
            - expand(gmap, mid - delta_intensity / 2.0))


@dataclass
class _Packed:
    ids: list[int]
    keys: list[tuple[int, int]]
    d: np.ndarray
    L: np.ndarray
    slot: np.ndarray

    @classmethod
    def from_obs(cls, obs: ObservationSet) -> "_Packed":
        ids = obs.landmark_ids
        keys, d, L, slot = [], [], [], []
        for k, n in enumerate(ids):
            for o in obs.groups[n]:
                keys.append((o.frame, n))
                d.append(o.distance)
                L.append(o.radiance)
                slot.append(k)
        return cls(ids, keys, np.array(d), np.array(L), np.array(slot, dtype=int))

    def subset(self, mask: np.ndarray) -> "_Packed":
        keys = [k for k, keep in zip(self.keys, mask) if keep]
        return _Packed(self.ids, keys, self.d[mask], self.L[mask], self.slot[mask])

    def residual(self, x: np.ndarray) -> np.ndarray:
        t = np.exp(-x[0] * self.d)
        return self.L - ((x[self.slot + 2] - x[1]) * t + x[1])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        t = np.exp(-x[0] * self.d)
        J = np.zeros((self.d.size, 2 + len(self.ids)))
        J[:, 0] = self.d * (x[self.slot + 2] - x[1]) * t
        J[:, 1] = t - 1.0
        J[np.arange(self.d.size), self.slot + 2] = -t
        return J


def residual_and_jacobian(params: np.ndarray, obs: ObservationSet):
    """Residual vector and Jacobian of the fog model at ``params``.

    ``params`` is [beta, l_inf, lc...] with clear radiances in sorted
    landmark id order; rows follow the same ordering, observations sorted by
    distance within each landmark.
    """
    packed = _Packed.from_obs(obs)
    params = np.asarray(params, dtype=float)
    if params.shape != (2 + len(packed.ids),):
        raise ValueError("params must be [beta, l_inf] plus one lc per landmark")
    return packed.residual(params), packed.jacobian(params)


def should_update(position: float, state: EstimatorState,
                  config: EstimatorConfig = EstimatorConfig()) -> bool:
    """True when the platform has moved at least the update gate since the
    last estimate (or none was made yet)."""
    if state.last_update_position is None:
        return True
    return abs(position - state.last_update_position) >= config.update_gate


def estimate(obs: ObservationSet, gmap: GammaMap, state: EstimatorState,
             config: EstimatorConfig = EstimatorConfig()) -> EstimateResult:
    """Two-stage bounded robust solve for (beta, l_inf, lc...).

    Raises NotEnoughDataError when fewer than ``xi_k`` landmarks qualify and
    DegenerateDataError when no landmark has any distance spread. An empty
    stage-1 inlier set skips stage 2 and flags the result as degraded.
    """
    if not check_sufficiency(obs, config.thresholds):
        raise NotEnoughDataError(
            f"{len(obs.groups)} qualifying landmarks, xi_k={config.xi_k} required")
    if all(_extremal_obs(g)[1].distance == _extremal_obs(g)[0].distance
           for g in obs.groups.values()):
        raise DegenerateDataError("no landmark has distance spread; beta is unidentifiable")

    bounds = derive_bounds(obs, gmap, config.eta, config.beta_bounds)
    x0 = initialize(obs, state, bounds)
    packed = _Packed.from_obs(obs)
    lo, hi = bounds.as_vectors(packed.ids)

    # reference for the confidence weights: previous estimate where available,
    # this update's initialization otherwise
    reference = FogEstimate(
        beta=x0[0], l_inf=x0[1],
        lc={n: x0[2 + k] for k, n in enumerate(packed.ids)})
    if config.uniform_weights:
        w = np.ones(len(packed.keys))
    else:
        wmap = compute_weights(obs, reference, state.inlier_counts)
        w = np.array([wmap[key] for key in packed.keys])

    delta_l = huber_delta_radiance(gmap, config.delta)
    stage1 = solve(
        ResidualProblem(n_params=x0.size, residual=packed.residual,
                        jacobian=packed.jacobian, weights=w,
                        loss="huber", huber_delta=delta_l,
                        lower=lo, upper=hi),
        x0, config.solver)

    inlier = np.abs(stage1.residuals) <= delta_l
    for key, good in zip(packed.keys, inlier):
        if good:
            state.inlier_counts[key] = state.inlier_counts.get(key, 0) + 1

    stage2 = None
    degraded = False
    final = stage1.params
    if config.two_stage:
        if not inlier.any():
            degraded = True
        else:
            sub = packed.subset(inlier)
            stage2 = solve(
                ResidualProblem(n_params=x0.size, residual=sub.residual,
                                jacobian=sub.jacobian, loss="square",
                                lower=lo, upper=hi),
                stage1.params, config.solver)
            final = stage2.params

    result = FogEstimate(
        beta=float(final[0]), l_inf=float(final[1]),
        lc={n: float(final[2 + k]) for k, n in enumerate(packed.ids)})
    state.previous = result
    return EstimateResult(estimate=result, state=state, bounds=bounds,
                          stage1=stage1, stage2=stage2,
                          inlier_fraction=float(inlier.mean()), degraded=degraded)


# --- estimate stream records -------------------------------------------------

RECORD_FIELDS = ("frame", "channel", "beta", "l_inf", "visibility",
                 "inlier_fraction", "stage1_cost", "stage2_cost", "degraded")


def format_estimate_record(frame: int, channel: str, result: EstimateResult) -> str:
    """One key=value line per update, consumed by the harness."""
    est = result.estimate
    s2 = result.stage2.cost if result.stage2 is not None else math.nan
    vals = (frame, channel, est.beta, est.l_inf, est.visibility,
            result.inlier_fraction, result.stage1.cost, s2, int(result.degraded))
    return " ".join(f"{k}={v}" for k, v in zip(RECORD_FIELDS, vals))


def parse_estimate_record(line: str) -> dict:
    out: dict = {}
    for token in line.split():
        if "=" not in token:
            raise MapFormatError(f"bad record token {token!r}")
        key, val = token.split("=", 1)
        if key not in RECORD_FIELDS:
            raise MapFormatError(f"unknown record field {key!r}")
        if key == "channel":
            out[key] = val
        elif key in ("frame", "degraded"):
            out[key] = int(val)
        else:
            out[key] = float(val)
    missing = [k for k in RECORD_FIELDS if k not in out]
    if missing:
        raise MapFormatError(f"record missing fields {missing}")
    return out
