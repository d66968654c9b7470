"""Parameter sweeps, Wilson intervals, CSV output and crossing estimates."""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from .core import ConfigurationError, NoiseParams, derive_rng
from . import gkp_single, toric_channel, toric3d

CSV_HEADER = ("experiment", "decoder", "sigma0", "sigma_m_ratio", "sigma_t_ratio", "distance",
              "rounds", "trials", "failures", "p_fail", "ci_low", "ci_high", "seed")

EXPERIMENTS = ("gkp-single", "toric-channel", "toric-3d")
DECODERS = {
    "gkp-single": ("forward", "ml", "dp", "memoryless", "passive"),
    "toric-channel": ("mwpm",),
    "toric-3d": ("alg1", "alg2", "perfect-gkp"),
}
DEFAULT_CUTOFF = {"forward": 10, "ml": 2, "dp": 10, "memoryless": 0, "passive": 0,
                  "mwpm": toric_channel.FLIP_CUTOFF, "alg1": 10, "alg2": 10, "perfect-gkp": 10}
DEFAULT_BLOCK = {"gkp-single": 5000, "toric-channel": 500, "toric-3d": 100}
# stream label per experiment so sweeps of different kinds never share draws
_STREAM = {"gkp-single": 1, "toric-channel": 2, "toric-3d": 3}

WILSON_Z = 1.959963984540054


InvariantViolation = toric3d.InvariantViolation
_USES_CUTOFF = ("forward", "ml", "dp", "mwpm", "alg1", "alg2", "perfect-gkp")


# ---------------------------------------------------------------- statistics

def wilson_interval(failures: int, trials: int, z: float = WILSON_Z) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ConfigurationError("trials must be positive")
    if not 0 <= failures <= trials:
        raise ConfigurationError("failures must lie in [0, trials]")
    p = failures / trials
    z2 = z * z
    den = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / den
    # exact at the ends; rounding must not push the bounds past the estimate
    return min(p, max(0.0, centre - half)), max(p, min(1.0, centre + half))


# ---------------------------------------------------------------- configuration

def sigma_grid(lo: float, hi: float, step: float) -> tuple:
    """Inclusive grid ``lo, lo + step, ..., <= hi`` rounded to 10 decimals."""
    if not step > 0:
        raise ConfigurationError("sigma0 step must be positive")
    if hi < lo:
        raise ConfigurationError("sigma0 max is below sigma0 min")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + i * step, 10) for i in range(n))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a sweep's output.

    ``rounds`` is the list of round counts for ``gkp-single``; for
    ``toric-3d`` an empty list means ``M = d``. ``block_size`` fixes how trials
    are cut into independently seeded blocks, so it is part of the result's
    identity while ``workers`` is not.
    """

    experiment: str
    decoder: Optional[str] = None
    sigma0_min: float = 0.1
    sigma0_max: float = 0.9
    sigma0_step: float = 0.05
    sigma_m_ratio: float = 1.0
    sigma_t_ratio: float = 1.0
    distances: tuple = (3, 5, 7)
    rounds: tuple = ()
    trials: int = 1000
    seed: int = 0
    out: Optional[str] = None
    cutoff: Optional[int] = None
    workers: int = 1
    gkp_info: bool = True
    block_size: Optional[int] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        dec = self.decoder or DECODERS[self.experiment][0]
        if dec not in DECODERS[self.experiment]:
            raise ConfigurationError(
                f"decoder {dec!r} is not available for {self.experiment}; "
                f"choose from {', '.join(DECODERS[self.experiment])}")
        object.__setattr__(self, "decoder", dec)
        object.__setattr__(self, "distances", tuple(int(d) for d in self.distances))
        object.__setattr__(self, "rounds", tuple(int(m) for m in self.rounds))
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", DEFAULT_CUTOFF[dec])
        if self.block_size is None:
            object.__setattr__(self, "block_size", DEFAULT_BLOCK[self.experiment])
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.block_size < 1:
            raise ConfigurationError("block size must be >= 1")
        if self.sigma0_min <= 0:
            raise ConfigurationError("sigma0 must be positive")
        if self.sigma_m_ratio < 0 or self.sigma_t_ratio < 0:
            raise ConfigurationError("noise ratios must be non-negative")
        if dec in _USES_CUTOFF and self.cutoff < 1:
            raise ConfigurationError("cutoff must be >= 1")
        sigma_grid(self.sigma0_min, self.sigma0_max, self.sigma0_step)
        if self.experiment == "gkp-single":
            if not self.rounds:
                object.__setattr__(self, "rounds", tuple(range(3, 12)))
            if min(self.rounds) < 1:
                raise ConfigurationError("rounds must be >= 1")
            if dec in ("ml", "dp", "forward") and self.sigma_m_ratio == 0 and max(self.rounds) > 1:
                raise ConfigurationError(f"decoder {dec} needs sigma_m_ratio > 0")
        else:
            if not self.distances or min(self.distances) < 2:
                raise ConfigurationError("distances must be a non-empty list of integers >= 2")
            if self.rounds and min(self.rounds) < 1:
                raise ConfigurationError("rounds must be >= 1")
        if self.experiment == "toric-3d":
            if dec == "perfect-gkp" and self.sigma_m_ratio != 0:
                raise ConfigurationError("the perfect-gkp decoder needs sigma_m_ratio = 0")
            if self.sigma_m_ratio == 0 and dec != "perfect-gkp":
                raise ConfigurationError("sigma_m_ratio = 0 requires --decoder perfect-gkp")

    @property
    def sigma0_values(self) -> tuple:
        return sigma_grid(self.sigma0_min, self.sigma0_max, self.sigma0_step)

    @property
    def decoder_label(self) -> str:
        if self.experiment == "toric-channel":
            return "mwpm-gkp-info" if self.gkp_info else "mwpm-uniform"
        return self.decoder

    def points(self) -> list:
        """Grid points ``(sigma0, distance, rounds)`` in output order."""
        pts = []
        for s in self.sigma0_values:
            if self.experiment == "gkp-single":
                pts.extend((s, 1, m) for m in self.rounds)
            elif self.experiment == "toric-channel":
                pts.extend((s, d, 1) for d in self.distances)
            else:
                for d in self.distances:
                    pts.extend((s, d, m) for m in (self.rounds or (d,)))
        return pts

    def to_json(self) -> dict:
        d = asdict(self)
        d["distances"] = list(self.distances)
        d["rounds"] = list(self.rounds)
        return d


# ---------------------------------------------------------------- trial blocks

DP_MAX_PERIODS = 32


def dp_parities(q: np.ndarray, params: NoiseParams, cutoff: int) -> np.ndarray:
    """Grid decoder parities with the window doubled for records whose path hits its edge.

    Starts from 200 points per period over 4 periods; rows still flagged after
    ``DP_MAX_PERIODS`` periods keep the value -1.
    """
    par = gkp_single.dp_batch(q, params.sigma, params.sigmaM, cutoff, 200, 4, True)
    periods = 8
    while np.any(par < 0) and periods <= DP_MAX_PERIODS:
        bad = np.flatnonzero(par < 0)
        par[bad] = gkp_single.dp_batch(q[bad], params.sigma, params.sigmaM, cutoff, 200, periods, True)
        periods *= 2
    return par

def _gkp_single_failures(rng, cfg: ExperimentConfig, params: NoiseParams, M: int, n: int) -> int:
    _, _, _, q, k = gkp_single.simulate_batch(rng, params, M, n)
    dec = cfg.decoder
    if dec == "forward":
        par = gkp_single.forward_min_batch(q, params.sigma, params.sigmaM, cfg.cutoff)
    elif dec == "memoryless":
        par = gkp_single.memoryless_batch(q)
    elif dec == "passive":
        par = gkp_single.passive_batch(q)
    elif dec == "dp":
        par = dp_parities(q, params, cfg.cutoff)
    else:
        mats = gkp_single.ml_matrices(params, M, cfg.cutoff)
        R = gkp_single.ml_upper_factor(mats)
        par = gkp_single.ml_batch(q, R, cfg.cutoff, gkp_single.ML_PRUNE)
    if np.any(par < 0):
        raise InvariantViolation(f"{dec} decoder failed on {int(np.count_nonzero(par < 0))} records")
    return int(np.count_nonzero(par != (k & 1)))


def _channel_failures(rng, cfg, params, L, n) -> int:
    try:
        return toric_channel.channel_failures(rng, params, L, n, cfg.gkp_info, cfg.cutoff)
    except toric_channel.CycleError as exc:
        raise InvariantViolation(str(exc)) from exc


def _space_time_failures(rng, cfg, params, L, M, n) -> int:
    lat = toric3d.CubicLattice(L, M)
    dec = toric3d.SpaceTimeDecoder(lat, cfg.decoder, cutoff=cfg.cutoff)
    eps, delta, xi = toric3d._sample_arrays(rng, params, lat, n)
    rows = dec.classify_batch(eps, delta, xi, params)
    bad = rows[:, 0] != toric3d.OK
    if np.any(bad):
        raise InvariantViolation(toric3d._STATUS_TEXT[int(rows[bad][0, 0])])
    return int(np.count_nonzero(rows[:, 1] | rows[:, 2]))


def run_block(cfg: ExperimentConfig, point_index: int, block_index: int) -> int:
    """Failures in one seeded block of trials at one grid point."""
    sigma0, d, M = cfg.points()[point_index]
    start = block_index * cfg.block_size
    n = min(cfg.block_size, cfg.trials - start)
    rng = derive_rng(cfg.seed, _STREAM[cfg.experiment], point_index, block_index)
    params = NoiseParams.from_sigma0(sigma0, cfg.sigma_m_ratio, cfg.sigma_t_ratio)
    if cfg.experiment == "gkp-single":
        return _gkp_single_failures(rng, cfg, params, M, n)
    if cfg.experiment == "toric-channel":
        return _channel_failures(rng, cfg, params, d, n)
    return _space_time_failures(rng, cfg, params, d, M, n)


def _run_block_task(args):
    cfg, i, b = args
    t0 = time.perf_counter()
    return i, b, run_block(cfg, i, b), time.perf_counter() - t0


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class PointResult:
    experiment: str
    decoder: str
    sigma0: float
    sigma_m_ratio: float
    sigma_t_ratio: float
    distance: int
    rounds: int
    trials: int
    failures: int
    seed: int
    wall_time: float = 0.0

    @property
    def p_fail(self) -> float:
        return self.failures / self.trials

    @property
    def ci(self) -> tuple:
        return wilson_interval(self.failures, self.trials)

    def csv_row(self) -> list:
        lo, hi = self.ci
        return [self.experiment, self.decoder, repr(self.sigma0), repr(self.sigma_m_ratio),
                repr(self.sigma_t_ratio), self.distance, self.rounds, self.trials, self.failures,
                repr(self.p_fail), repr(lo), repr(hi), self.seed]


@dataclass
class TrialBatchResult:
    """Per-point failure counts of one sweep."""

    config: ExperimentConfig
    points: list = field(default_factory=list)
    wall_time: float = 0.0
    complete: bool = True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow(p.csv_row())
        return buf.getvalue()

    def curves(self, rounds: Optional[int] = None) -> Dict[int, tuple]:
        """Per-distance ``(sigma0, failures, trials)`` arrays for crossing estimates."""
        out = {}
        for d in sorted({p.distance for p in self.points}):
            pts = [p for p in self.points if p.distance == d and (rounds is None or p.rounds == rounds)]
            pts.sort(key=lambda p: p.sigma0)
            out[d] = (np.array([p.sigma0 for p in pts]), np.array([p.failures for p in pts]),
                      np.array([p.trials for p in pts]))
        return out

    def write(self, path) -> Path:
        """Write the CSV and a JSON sidecar next to it."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        side = {
            "config": self.config.to_json(),
            "complete": self.complete,
            "wall_time": self.wall_time,
            "point_wall_time": [p.wall_time for p in self.points],
            "blocks_per_point": _n_blocks(self.config),
        }
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(side, indent=2, sort_keys=True))
        return sidecar


def _n_blocks(cfg: ExperimentConfig) -> int:
    return -(-cfg.trials // cfg.block_size)


def run_sweep(cfg: ExperimentConfig) -> TrialBatchResult:
    """Run every grid point; the counts depend on the config but not on ``workers``.

    Trials at point ``i`` are cut into blocks of ``block_size``; block ``b``
    draws from the stream ``(seed, experiment, i, b)``. Counts are summed per
    point in index order. On ``KeyboardInterrupt`` the points already finished
    are written to ``cfg.out`` (if set) before the interrupt propagates.
    """
    pts = cfg.points()
    nb = _n_blocks(cfg)
    tasks = [(cfg, i, b) for i in range(len(pts)) for b in range(nb)]
    counts: Dict[int, Dict[int, int]] = {i: {} for i in range(len(pts))}
    times = np.zeros(len(pts))
    t0 = time.perf_counter()
    result = TrialBatchResult(cfg)

    def collect(i, b, f, dt):
        counts[i][b] = f
        times[i] += dt

    try:
        if cfg.workers == 1:
            for task in tasks:
                collect(*_run_block_task(task))
        else:
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=ctx) as ex:
                futures = [ex.submit(_run_block_task, t) for t in tasks]
                try:
                    for fut in as_completed(futures):
                        collect(*fut.result())
                except BaseException:
                    for fut in futures:
                        fut.cancel()
                    raise
    except KeyboardInterrupt:
        result.complete = False
        result.points = _assemble(cfg, pts, counts, times, nb)
        result.wall_time = time.perf_counter() - t0
        if cfg.out:
            result.write(cfg.out)
        raise
    result.points = _assemble(cfg, pts, counts, times, nb)
    result.wall_time = time.perf_counter() - t0
    if cfg.out:
        result.write(cfg.out)
    return result


def _assemble(cfg, pts, counts, times, nb) -> list:
    out = []
    for i, (s, d, m) in enumerate(pts):
        if len(counts[i]) != nb:
            continue
        fails = sum(counts[i][b] for b in range(nb))
        out.append(PointResult(cfg.experiment, cfg.decoder_label, float(s), float(cfg.sigma_m_ratio),
                               float(cfg.sigma_t_ratio), int(d), int(m), int(cfg.trials), int(fails),
                               int(cfg.seed), float(times[i])))
    return out


def read_csv(path) -> list:
    """Rows of a sweep CSV as dictionaries with numeric fields converted."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != CSV_HEADER:
        raise ConfigurationError(f"{path}: unexpected CSV header")
    for r in rows:
        for key in ("sigma0", "sigma_m_ratio", "sigma_t_ratio", "p_fail", "ci_low", "ci_high"):
            r[key] = float(r[key])
        for key in ("distance", "rounds", "trials", "failures", "seed"):
            r[key] = int(r[key])
    return rows


# ---------------------------------------------------------------- crossings

@dataclass(frozen=True)
class CrossingEstimate:
    """Median pairwise crossing with a bootstrap interval.

    ``value`` is ``None`` when no pair of curves crosses inside the grid.
    """

    value: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    pairwise: tuple
    message: str = ""

    @property
    def found(self) -> bool:
        return self.value is not None


def _pair_crossing(s, la, lb):
    # first grid interval where ln p_b - ln p_a goes from < 0 to >= 0,
    # interpolated linearly in ln sigma
    diff = lb - la
    ok = np.isfinite(diff)
    for j in range(len(s) - 1):
        if not (ok[j] and ok[j + 1]):
            continue
        if diff[j] < 0 <= diff[j + 1]:
            x0, x1 = math.log(s[j]), math.log(s[j + 1])
            t = -diff[j] / (diff[j + 1] - diff[j])
            return math.exp(x0 + t * (x1 - x0))
    return None


def _median_crossing(sig, logp: Dict[int, np.ndarray]):
    ds = sorted(logp)
    found = []
    for a in range(len(ds)):
        for b in range(a + 1, len(ds)):
            c = _pair_crossing(sig, logp[ds[a]], logp[ds[b]])
            if c is not None:
                found.append(((ds[a], ds[b]), c))
    med = float(np.median([c for _, c in found])) if found else None
    return med, found


def _log_rates(failures, trials):
    # a zero count sits half a failure above zero so the log stays finite
    f = np.asarray(failures, float)
    n = np.asarray(trials, float)
    return np.log(np.where(f > 0, f, 0.5) / n)


def estimate_crossing(curves: Dict[int, tuple], n_boot: int = 500, seed: int = 0,
                      level: float = 0.95) -> CrossingEstimate:
    """Threshold estimate from per-distance logical failure curves.

    Parameters
    ----------
    curves : dict
        ``distance -> (sigma0, p)`` with exact rates, or
        ``distance -> (sigma0, failures, trials)`` with counts. All curves must
        share the same ``sigma0`` grid.
    n_boot : int
        Bootstrap replicates; each resamples every point's trials (binomially).

    Returns
    -------
    CrossingEstimate
        Median of the pairwise crossings where the larger code goes from
        better to worse; the interval is the bootstrap percentile range.
    """
    if len(curves) < 2:
        raise ConfigurationError("need at least two distances")
    ds = sorted(curves)
    sig = np.asarray(curves[ds[0]][0], float)
    for d in ds:
        if not np.array_equal(np.asarray(curves[d][0], float), sig):
            raise ConfigurationError("curves must share the sigma0 grid")
    if sig.size < 2 or np.any(np.diff(sig) <= 0):
        raise ConfigurationError("sigma0 grid must be increasing with at least two points")
    counted = len(curves[ds[0]]) == 3
    if counted:
        logp = {d: _log_rates(curves[d][1], curves[d][2]) for d in ds}
    else:
        with np.errstate(divide="ignore"):
            logp = {d: np.log(np.asarray(curves[d][1], float)) for d in ds}
    value, pairs = _median_crossing(sig, logp)
    if value is None:
        return CrossingEstimate(None, None, None, (), "no crossing in range")
    lo = hi = None
    if counted and n_boot > 0:
        rng = np.random.default_rng(seed)
        reps = []
        for _ in range(n_boot):
            lp = {}
            for d in ds:
                n = np.asarray(curves[d][2])
                p = np.asarray(curves[d][1]) / n
                lp[d] = _log_rates(rng.binomial(n, p), n)
            v, _ = _median_crossing(sig, lp)
            if v is not None:
                reps.append(v)
        if reps:
            a = (1 - level) / 2
            lo, hi = (float(x) for x in np.quantile(reps, [a, 1 - a]))
    return CrossingEstimate(value, lo, hi, tuple(pairs))


def crossing_from_rows(rows: Sequence[dict], **kw) -> Dict[tuple, CrossingEstimate]:
    """Group CSV rows by experiment, decoder and ratios and estimate each crossing."""
    groups: Dict[tuple, Dict[int, list]] = {}
    for r in rows:
        key = (r["experiment"], r["decoder"], r["sigma_m_ratio"], r["sigma_t_ratio"])
        groups.setdefault(key, {}).setdefault(r["distance"], []).append(r)
    out = {}
    for key, per_d in groups.items():
        if len(per_d) < 2:
            out[key] = CrossingEstimate(None, None, None, (), "need at least two distances")
            continue
        grids = [sorted(r["sigma0"] for r in v) for v in per_d.values()]
        common = sorted(set(grids[0]).intersection(*grids[1:]))
        curves = {}
        for d, v in per_d.items():
            by_s = {r["sigma0"]: r for r in v}
            curves[d] = (np.array(common), np.array([by_s[s]["failures"] for s in common]),
                         np.array([by_s[s]["trials"] for s in common]))
        if len(common) < 2:
            out[key] = CrossingEstimate(None, None, None, (), "no crossing in range")
        else:
            out[key] = estimate_crossing(curves, **kw)
    return out
