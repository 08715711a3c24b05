"""Physical scenarios and parameter sweeps.

A scenario is a square room with reflecting surfaces on its walls, a user
population placed uniformly at random, nearest-surface association, and
the link/queue parameters needed to turn geometry into per-user update
rates.  Sweeps vary user count or bandwidth over a value ladder with
replications; every cell is reproducible from the master seed.

User placement uses one substream per user index, so growing the
population extends the placement instead of reshuffling it, and the same
replication sees identical users across sweep values.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import aoi_analytic as an
from . import queue_sim as qs
from . import thz_link as link

_PLACEMENT_TAG = 7


class ConfigError(ValueError):
    """Configuration file problem; message carries the offending field path."""


class SweepVariable(enum.Enum):
    NUM_USERS = "num_users"
    BANDWIDTH = "bandwidth"


class ArrivalRateMode(enum.Enum):
    """How the compute-queue arrival rate is derived from the stages."""

    BURKE = "burke"            # sum of stage service rates, as published
    THROUGHPUT = "throughput"  # sum of finite-buffer stage throughputs


@dataclass(frozen=True)
class Room:
    side_length: float = 50.0
    ris_positions: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.side_length <= 0:
            raise ValueError("side_length must be strictly positive")
        if not self.ris_positions:
            object.__setattr__(self, "ris_positions", wall_midpoints(self.side_length))
        for i, (x, y) in enumerate(self.ris_positions):
            on_x = math.isclose(x, 0.0, abs_tol=1e-9) or math.isclose(x, self.side_length, abs_tol=1e-9)
            on_y = math.isclose(y, 0.0, abs_tol=1e-9) or math.isclose(y, self.side_length, abs_tol=1e-9)
            inside = -1e-9 <= x <= self.side_length + 1e-9 and -1e-9 <= y <= self.side_length + 1e-9
            if not inside or not (on_x or on_y):
                raise ValueError(f"ris_positions[{i}] must lie on the room boundary")


def wall_midpoints(side: float) -> tuple[tuple[float, float], ...]:
    """Default surface placement: the midpoint of each of the four walls."""
    h = side / 2.0
    return ((h, 0.0), (side, h), (h, side), (0.0, h))


@dataclass(frozen=True)
class Scenario:
    room: Room
    num_users: int
    link_params: link.LinkParams
    queue: qs.QueueConfig
    placement_seed: int

    def __post_init__(self):
        if self.num_users < 0:
            raise ValueError("num_users must be non-negative")


@dataclass(frozen=True)
class Sweep:
    variable: SweepVariable
    values: tuple[float, ...]
    replications: int
    base: Scenario

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")


@dataclass(frozen=True)
class SweepSettings:
    ruin_level: float
    threshold_z: float
    horizon: float
    master_seed: int
    arrival_mode: ArrivalRateMode = ArrivalRateMode.BURKE

    def __post_init__(self):
        if self.ruin_level <= 0:
            raise ValueError("ruin_level must be strictly positive")
        if self.threshold_z <= 0 or self.horizon <= 0:
            raise ValueError("threshold and horizon must be strictly positive")


# ---------------------------------------------------------------------------
# geometry -> rates

def place_users(scenario: Scenario) -> np.ndarray:
    """I.i.d. uniform positions strictly inside the room, one substream per user."""
    side = scenario.room.side_length
    pts = np.empty((scenario.num_users, 2))
    for u in range(scenario.num_users):
        rng = np.random.default_rng(
            np.random.SeedSequence(scenario.placement_seed, spawn_key=(_PLACEMENT_TAG, u)))
        x, y = rng.uniform(0.0, side, size=2)
        while x <= 0.0 or x >= side or y <= 0.0 or y >= side:
            x, y = rng.uniform(0.0, side, size=2)
        pts[u] = (x, y)
    return pts


def associate(users: np.ndarray, room: Room) -> tuple[np.ndarray, list[link.LinkGeometry]]:
    """Nearest-surface assignment (Euclidean, ties to the lowest index)."""
    ris = np.asarray(room.ris_positions, dtype=float)
    if ris.size == 0:
        raise ValueError("room has no reflecting surfaces")
    geoms = []
    serving = np.empty(len(users), dtype=int)
    for u, pos in enumerate(np.atleast_2d(users)):
        dists = np.hypot(ris[:, 0] - pos[0], ris[:, 1] - pos[1])
        b = int(np.argmin(dists))
        serving[u] = b
        geoms.append(link.LinkGeometry(float(dists[b]), tuple(float(d) for d in dists)))
    return serving, geoms


def realize_rates(scenario: Scenario, positions: np.ndarray | None = None) -> np.ndarray:
    """Per-user update rates from the link-budget chain."""
    if positions is None:
        positions = place_users(scenario)
    _, geoms = associate(positions, scenario.room)
    rates = np.empty(len(geoms))
    for u, geom in enumerate(geoms):
        r_bits = link.rate_bps(geom, scenario.link_params)
        rates[u] = link.update_rate(r_bits, scenario.link_params)
    return rates


def compute_arrival_rate(rates: Sequence[float], mu_u: float,
                         mode: ArrivalRateMode) -> float:
    if mode is ArrivalRateMode.BURKE:
        return mu_u * len(rates)
    return float(sum(an.stage_throughput(r, mu_u) for r in rates))


# ---------------------------------------------------------------------------
# sweep execution

SWEEP_COLUMNS = [
    "sweep_var", "value", "replication", "discipline",
    "avg_analytic_mode", "avg_analytic", "avg_sim", "avg_sim_ci",
    "severity_mode", "j_z", "j_validity", "ks_stage", "drops", "preemptions",
    "avg_analytic_per_user", "avg_sim_per_user",
    "sim_severity_below_z", "sim_excursions",
    "lambda_c", "burke_gap", "error",
]


def _apply_value(scenario: Scenario, variable: SweepVariable, value: float) -> Scenario:
    if variable is SweepVariable.NUM_USERS:
        return replace(scenario, num_users=int(value))
    lp = scenario.link_params
    new_lp = link.LinkParams(
        bandwidth_hz=float(value), carrier_hz=lp.carrier_hz,
        tx_power_w=lp.tx_power_w, absorption_per_m=lp.absorption_per_m,
        temperature_k=lp.temperature_k, meta_surfaces=lp.meta_surfaces,
        image_size_bits=lp.image_size_bits)
    return replace(scenario, link_params=new_lp)


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _sim_severity(samples: qs.PaoiSamples, ruin_level: float, z: float):
    """Pool completed stage excursions across users; empirical P(M - a <= z)."""
    pooled = []
    for u in range(len(samples.rates)):
        stats_ = qs.excursion_severity(samples.series(u, qs.Stage.STAGE1), ruin_level)
        pooled.append(stats_.exceedances)
    exc = np.concatenate(pooled) if pooled else np.empty(0)
    if exc.size == 0:
        return math.nan, 0
    return float(np.mean(exc <= z)), int(exc.size)


def run_sweep(sweep: Sweep, settings: SweepSettings, sample_sink=None) -> list[dict]:
    """One row per (value, replication, discipline, avg mode, severity mode).

    Cell failures (e.g. an unstable compute queue in corrected mode) are
    recorded in the row's ``error`` column; the sweep never aborts.
    ``sample_sink(value, replication, discipline, samples)`` receives each
    cell's raw simulator output, e.g. for CSV export.
    """
    rows: list[dict] = []
    for vi, value in enumerate(sweep.values):
        for rep in range(sweep.replications):
            scen = _apply_value(sweep.base, sweep.variable, value)
            scen = replace(scen, placement_seed=_derived_seed(scen.placement_seed, 1000 + rep))
            rates = realize_rates(scen)
            for di, disc in enumerate((an.Discipline.FCFS_MM12, an.Discipline.LCFS_MM12_STAR)):
                rows.extend(_run_cell(sweep, settings, scen, rates, value, vi, rep,
                                      di, disc, sample_sink))
    return rows


def _run_cell(sweep, settings, scen, rates, value, vi, rep, di, disc,
              sample_sink=None) -> list[dict]:
    mu_u = scen.queue.stage_service_rate
    mu_c = scen.queue.compute_service_rate
    base_row = {
        "sweep_var": sweep.variable.value, "value": value, "replication": rep,
        "discipline": disc.value, "error": "",
    }
    try:
        lam_c = compute_arrival_rate(rates, mu_u, settings.arrival_mode)
        stages = tuple(an.StageLaw(float(r), mu_u, disc) for r in rates)
        sys_law = an.SystemLaw(stages, an.ExponentMode.HETEROGENEOUS_PRODUCT)

        config = qs.QueueConfig(disc, mu_u, mu_c, scen.queue.compute_feed)
        sim_seed = _derived_seed(settings.master_seed, vi, rep, di)
        samples = qs.run(config, rates, settings.horizon, sim_seed)
        if sample_sink is not None:
            sample_sink(value, rep, disc, samples)
        sim_avg = qs.e2e_average_estimate(samples)
        sev_below, n_exc = _sim_severity(samples, settings.ruin_level, settings.threshold_z)
        ks = qs.ks_distance(qs.empirical_cdf(samples, 0, qs.Stage.STAGE1),
                            an.cdf_reference(stages[0])) if len(samples.stage1[0]) else math.nan
        drops = sum(c.drops for c in samples.stage_counters.values())
        preempts = sum(c.preemptions for c in samples.stage_counters.values())
        burke_gap = mu_u * len(rates) - samples.compute_arrival_rate
    except (ValueError, ArithmeticError) as exc:
        row = dict(base_row)
        row["error"] = str(exc)
        return [row]

    n_users = max(len(rates), 1)
    sev_pair = an.severity_both_modes(sys_law, settings.ruin_level,
                                      settings.threshold_z)
    out = []
    for avg_mode in (an.AvgMode.CORRECTED, an.AvgMode.AS_WRITTEN):
        try:
            comp = an.ComputeQueueLaw(lam_c, mu_c, avg_mode)
            avg_val = an.avg_paoi_e2e(sys_law, comp)
            avg_err = ""
        except (an.InstabilityError, ValueError) as exc:
            avg_val = math.nan
            avg_err = str(exc)
        for psi_mode in (an.PsiMode.AS_WRITTEN_CDF, an.PsiMode.SURVIVAL):
            sev = sev_pair[psi_mode]
            row = dict(base_row)
            row.update({
                "avg_analytic_mode": avg_mode.value,
                "avg_analytic": avg_val,
                "avg_sim": sim_avg.mean, "avg_sim_ci": sim_avg.halfwidth,
                "severity_mode": psi_mode.value,
                "j_z": sev.value, "j_validity": sev.validity.value,
                "ks_stage": ks, "drops": drops, "preemptions": preempts,
                "avg_analytic_per_user": avg_val / n_users,
                "avg_sim_per_user": sim_avg.mean / n_users,
                "sim_severity_below_z": sev_below, "sim_excursions": n_exc,
                "lambda_c": lam_c, "burke_gap": burke_gap,
                "error": avg_err,
            })
            out.append(row)
    return out


def aggregate_sweep(rows: Sequence[dict]) -> list[dict]:
    """Replication means and 95% half-widths per (value, discipline, modes)."""
    from scipy import stats as sps

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row.get("error"):
            continue
        key = (row["sweep_var"], row["value"], row["discipline"],
               row["avg_analytic_mode"], row["severity_mode"])
        groups.setdefault(key, []).append(row)
    out = []
    metrics = ["avg_analytic", "avg_sim", "avg_analytic_per_user",
               "avg_sim_per_user", "j_z", "ks_stage", "sim_severity_below_z"]
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3], k[4])):
        members = groups[key]
        agg = {"sweep_var": key[0], "value": key[1], "discipline": key[2],
               "avg_analytic_mode": key[3], "severity_mode": key[4],
               "replications": len(members)}
        for m in metrics:
            vals = np.asarray([r[m] for r in members], dtype=float)
            agg[f"{m}_mean"] = float(np.nanmean(vals)) if vals.size else math.nan
            if vals.size > 1 and np.all(np.isfinite(vals)):
                hw = float(sps.t.ppf(0.975, vals.size - 1)
                           * np.std(vals, ddof=1) / math.sqrt(vals.size))
            else:
                hw = 0.0
            agg[f"{m}_hw"] = hw
        out.append(agg)
    return out


# ---------------------------------------------------------------------------
# JSON configuration

def _check_keys(d: dict, required: set[str], optional: set[str], path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(d) - required - optional
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)}")


def parse_link(d: dict, path: str = "link") -> link.LinkParams:
    _check_keys(d, {"bandwidth_hz", "carrier_hz", "tx_power_w", "absorption_per_m",
                    "temperature_k", "meta_surfaces", "image_size_bits"}, set(), path)
    try:
        return link.LinkParams(
            bandwidth_hz=float(d["bandwidth_hz"]), carrier_hz=float(d["carrier_hz"]),
            tx_power_w=float(d["tx_power_w"]), absorption_per_m=float(d["absorption_per_m"]),
            temperature_k=float(d["temperature_k"]), meta_surfaces=int(d["meta_surfaces"]),
            image_size_bits=float(d["image_size_bits"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_room(d: dict, path: str = "room") -> Room:
    _check_keys(d, {"side_length"}, {"ris_positions"}, path)
    try:
        pos = tuple((float(x), float(y)) for x, y in d.get("ris_positions", ()))
        return Room(side_length=float(d["side_length"]), ris_positions=pos)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_queue(d: dict, path: str = "queue") -> qs.QueueConfig:
    _check_keys(d, {"discipline", "stage_service_rate", "compute_service_rate"},
                {"compute_feed"}, path)
    try:
        disc = an.Discipline(d["discipline"])
        feed = qs.ComputeFeed(d.get("compute_feed", "tandem"))
        return qs.QueueConfig(disc, float(d["stage_service_rate"]),
                              float(d["compute_service_rate"]), feed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_scenario(d: dict, path: str = "scenario") -> Scenario:
    _check_keys(d, {"link", "room", "queue", "num_users", "placement_seed"}, set(), path)
    try:
        return Scenario(
            room=parse_room(d["room"], f"{path}.room"),
            num_users=int(d["num_users"]),
            link_params=parse_link(d["link"], f"{path}.link"),
            queue=parse_queue(d["queue"], f"{path}.queue"),
            placement_seed=int(d["placement_seed"]))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_sweep(d: dict, base: Scenario, path: str = "sweep") -> tuple[Sweep, dict]:
    _check_keys(d, {"variable", "values", "replications", "ruin_level_s",
                    "threshold_z_s", "horizon_s"},
                {"arrival_mode"}, path)
    try:
        sweep = Sweep(SweepVariable(d["variable"]),
                      tuple(float(v) for v in d["values"]),
                      int(d["replications"]), base)
        extras = {
            "ruin_level": float(d["ruin_level_s"]),
            "threshold_z": float(d["threshold_z_s"]),
            "horizon": float(d["horizon_s"]),
            "arrival_mode": ArrivalRateMode(d.get("arrival_mode", "burke")),
        }
        return sweep, extras
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
