"""Stochastic metapopulation SIR integrator and observation synthesis.

The infectious compartment and the cumulative case counter follow a Langevin
system: frequency-dependent infection, constant removal, degree-weighted
migration between linked nodes, and one independent Gaussian channel per
demographic event type. The susceptible and removed compartments mirror the
infectious dynamics with the same migration law; that mirroring is a modelling
extension documented in the README.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import Network, mobility_matrix


class SimulationDiverged(RuntimeError):
    """Raised when a state becomes non-finite during integration."""


class ZeroVarianceError(ValueError):
    """Raised when a correlation is requested for a constant profile."""


@dataclass(frozen=True)
class EpidemicParams:
    """Transmission rates per unit time: infection (alpha), removal (beta),
    total mobility (gamma). beta must be positive; alpha and gamma may be
    zero so that pure-decay and migration-free sanity runs stay expressible.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name, low in (("alpha", 0.0), ("beta", None), ("gamma", 0.0)):
            value = getattr(self, name)
            ok = isinstance(value, (int, float)) and math.isfinite(value)
            ok = ok and (value > 0 if low is None else value >= low)
            if not ok:
                bound = "positive" if low is None else "non-negative"
                raise ValueError(f"{name} must be a finite {bound} number, got {value!r}")

    @property
    def reproductive_ratio(self) -> float:
        return self.alpha / self.beta


@dataclass(frozen=True)
class InitialCondition:
    """Outbreak start: index cases at one source node, total population split
    equally across nodes."""

    source: int
    index_cases: float = 20.0
    population: float = 1e8

    def __post_init__(self):
        if self.index_cases <= 0:
            raise ValueError(f"index_cases must be positive, got {self.index_cases!r}")
        if self.population <= 0:
            raise ValueError(f"population must be positive, got {self.population!r}")


class ObservableKind(str, enum.Enum):
    """What a Dataset records per node."""

    INFECTIOUS = "infectious"
    CUMULATIVE_CASES = "cumulative_cases"
    INFECTIOUS_CHANGE = "infectious_change"
    NEW_CASES = "new_cases"

    @property
    def is_difference(self) -> bool:
        return self in (ObservableKind.INFECTIOUS_CHANGE, ObservableKind.NEW_CASES)


@dataclass(frozen=True)
class CompartmentState:
    """Per-node susceptible / infectious / removed / cumulative-case vectors."""

    susceptible: np.ndarray
    infectious: np.ndarray
    removed: np.ndarray
    cases: np.ndarray

    def __post_init__(self):
        for name in ("susceptible", "infectious", "removed", "cases"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.ndim != 1:
                raise ValueError(f"{name} must be a vector")
            if (vec < 0).any():
                raise ValueError(f"{name} has a negative entry")
            vec = vec.copy()
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)


@dataclass(frozen=True)
class Dataset:
    """One observation vector (a number per node) plus its kind tag.

    ``t_obs`` is provenance for synthetic data only; real pipelines leave it
    unset because the outbreak start time is unknown.
    """

    values: np.ndarray
    kind: ObservableKind
    t_obs: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("dataset values must be a vector")
        if (values < 0).any():
            raise ValueError("dataset values must be non-negative")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", ObservableKind(self.kind))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Reported time series of one simulation run, on a uniform grid.

    Arrays are shaped (reports, nodes). Provenance (network, parameters, seed,
    step sizes, noise flag) is carried along so runs can be reproduced.
    """

    times: np.ndarray
    susceptible: np.ndarray
    infectious: np.ndarray
    removed: np.ndarray
    cases: np.ndarray
    network: Network
    params: EpidemicParams
    init: InitialCondition
    seed: tuple[int, ...]
    sim_dt: float
    report_dt: float
    noise: bool

    @property
    def n_nodes(self) -> int:
        return self.susceptible.shape[1]

    def report_index(self, t: float) -> int:
        """Index of reporting time t; errors if t is off-grid or out of range."""
        times = self.times
        if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
            raise ValueError(
                f"t={t!r} outside the simulated range [{times[0]}, {times[-1]}]"
            )
        idx = int(round((t - times[0]) / self.report_dt))
        idx = min(max(idx, 0), len(times) - 1)
        if abs(times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t!r} is not on the reporting grid (spacing {self.report_dt})")
        return idx

    def state(self, index: int) -> CompartmentState:
        return CompartmentState(
            self.susceptible[index],
            self.infectious[index],
            self.removed[index],
            self.cases[index],
        )

    def checksum(self) -> str:
        """Content hash of the reported series; equal runs hash equally."""
        h = hashlib.sha256()
        for arr in (self.times, self.susceptible, self.infectious, self.removed, self.cases):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()


def _normalize_seed(seed) -> tuple[int, ...]:
    if seed is None:
        raise ValueError("simulate requires an explicit seed")
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def _step_multiple(big: float, small: float, big_name: str, small_name: str) -> int:
    ratio = big / small
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"{big_name} ({big}) must be a positive multiple of {small_name} ({small})")
    return k


def simulate(
    net: Network,
    params: EpidemicParams,
    init: InitialCondition,
    t_end: float,
    *,
    sim_dt: float = 0.05,
    report_dt: float = 1.0,
    seed=0,
    noise: bool = True,
    force_of_infection_cases: bool = False,
) -> Trajectory:
    """Integrate the Langevin SIR system with the Euler–Maruyama scheme.

    Every noise channel (infection, removal, and each migration direction per
    compartment, inflow and outflow separately) draws an independent standard
    Gaussian each step, scaled by sqrt(sim_dt). The infection channel is
    shared between the infectious compartment and the case counter. States are
    clamped at zero after each step and the case-counter increment is clamped
    at zero, so cumulative cases never decrease. With ``noise=False`` the
    integration reduces to deterministic Euler on the drift terms.

    ``force_of_infection_cases`` switches the case counter from the plain
    infection rate (alpha * infectious) to the frustrated force of infection;
    it is off by default and exists for sensitivity checks.

    Raises SimulationDiverged if any state becomes non-finite, naming the
    node and time.
    """
    if sim_dt <= 0:
        raise ValueError(f"sim_dt must be positive, got {sim_dt!r}")
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    n = net.n
    if not 0 <= init.source < n:
        raise ValueError(f"source index {init.source} out of range for {n} nodes")
    share = init.population / n
    if init.index_cases > share:
        raise ValueError(
            f"index_cases ({init.index_cases}) exceeds the per-node population share ({share})"
        )
    steps_per_report = _step_multiple(report_dt, sim_dt, "report_dt", "sim_dt")
    n_reports = _step_multiple(t_end, report_dt, "t_end", "report_dt")
    seed_tuple = _normalize_seed(seed)

    if params.gamma > 0:
        g = mobility_matrix(net, params.gamma).g
    else:
        g = np.zeros((n, n))
    g_t = np.ascontiguousarray(g.T)
    leave_rate = g.sum(axis=1)
    src_e, dst_e = np.nonzero(g)
    rate_e = g[src_e, dst_e].copy()
    ne = src_e.size

    sus = np.full(n, share)
    inf = np.zeros(n)
    rem = np.zeros(n)
    cases = np.zeros(n)
    sus[init.source] -= init.index_cases
    inf[init.source] = init.index_cases
    cases[init.source] = init.index_cases

    out_shape = (n_reports + 1, n)
    out_s = np.empty(out_shape)
    out_i = np.empty(out_shape)
    out_r = np.empty(out_shape)
    out_j = np.empty(out_shape)
    out_s[0], out_i[0], out_r[0], out_j[0] = sus, inf, rem, cases

    rng = np.random.default_rng(seed_tuple) if noise else None
    sqrt_dt = math.sqrt(sim_dt)
    alpha, beta = params.alpha, params.beta

    def migration_noise(state, z_in, z_out):
        amp = np.sqrt(rate_e * state[src_e])
        gain = np.bincount(dst_e, weights=amp * z_in, minlength=n)
        loss = np.bincount(src_e, weights=amp * z_out, minlength=n)
        return gain - loss

    step = 0
    for report in range(1, n_reports + 1):
        # Overflow is handled by the divergence check below, so intermediate
        # arithmetic may produce inf/nan without warning spam.
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(steps_per_report):
                total = sus + inf + rem
                frac = np.divide(sus * inf, total, out=np.zeros(n), where=total > 0)
                force = alpha * frac
                removal = beta * inf
                case_rate = force if force_of_infection_cases else alpha * inf

                d_sus = (-force + g_t @ sus - leave_rate * sus) * sim_dt
                d_inf = (force - removal + g_t @ inf - leave_rate * inf) * sim_dt
                d_rem = (removal + g_t @ rem - leave_rate * rem) * sim_dt
                d_cases = case_rate * sim_dt

                if noise:
                    z = rng.standard_normal(2 * n + 6 * ne)
                    z_force = z[:n]
                    z_removal = z[n : 2 * n]
                    base = 2 * n
                    force_noise = np.sqrt(force) * z_force * sqrt_dt
                    removal_noise = np.sqrt(removal) * z_removal * sqrt_dt
                    d_sus += -force_noise + migration_noise(
                        sus, z[base : base + ne], z[base + ne : base + 2 * ne]
                    ) * sqrt_dt
                    d_inf += force_noise - removal_noise + migration_noise(
                        inf, z[base + 2 * ne : base + 3 * ne], z[base + 3 * ne : base + 4 * ne]
                    ) * sqrt_dt
                    d_rem += removal_noise + migration_noise(
                        rem, z[base + 4 * ne : base + 5 * ne], z[base + 5 * ne : base + 6 * ne]
                    ) * sqrt_dt
                    d_cases += np.sqrt(case_rate) * z_force * sqrt_dt

                sus = np.maximum(sus + d_sus, 0.0)
                inf = np.maximum(inf + d_inf, 0.0)
                rem = np.maximum(rem + d_rem, 0.0)
                cases = cases + np.maximum(d_cases, 0.0)
                step += 1

        # Non-finite values persist once they appear, so checking at report
        # boundaries still catches every divergence.
        if not (
            np.isfinite(sus).all()
            and np.isfinite(inf).all()
            and np.isfinite(rem).all()
            and np.isfinite(cases).all()
        ):
            t_fail = step * sim_dt
            for name, vec in (
                ("susceptible", sus),
                ("infectious", inf),
                ("removed", rem),
                ("cases", cases),
            ):
                bad = np.flatnonzero(~np.isfinite(vec))
                if bad.size:
                    node = int(bad[0])
                    raise SimulationDiverged(
                        f"non-finite {name} at node {net.labels[node]} "
                        f"(index {node}) at t={t_fail:.6g}"
                    )
        out_s[report], out_i[report], out_r[report], out_j[report] = sus, inf, rem, cases

    times = np.arange(n_reports + 1, dtype=float) * report_dt
    for arr in (times, out_s, out_i, out_r, out_j):
        arr.setflags(write=False)
    return Trajectory(
        times=times,
        susceptible=out_s,
        infectious=out_i,
        removed=out_r,
        cases=out_j,
        network=net,
        params=params,
        init=init,
        seed=seed_tuple,
        sim_dt=sim_dt,
        report_dt=report_dt,
        noise=noise,
    )


def synthesize_dataset(
    traj: Trajectory,
    t_obs: float,
    delta_t: float = 1.0,
    kind: ObservableKind = ObservableKind.NEW_CASES,
) -> Dataset:
    """Slice an observation vector out of a trajectory.

    Difference kinds report max(0, X(t_obs + delta_t) - X(t_obs)) per node;
    snapshot kinds report the raw vector at t_obs (delta_t is ignored).
    """
    kind = ObservableKind(kind)
    idx = traj.report_index(t_obs)
    if kind is ObservableKind.INFECTIOUS:
        values = traj.infectious[idx].copy()
    elif kind is ObservableKind.CUMULATIVE_CASES:
        values = traj.cases[idx].copy()
    else:
        series = traj.infectious if kind is ObservableKind.INFECTIOUS_CHANGE else traj.cases
        idx_later = traj.report_index(t_obs + delta_t)
        values = np.maximum(series[idx_later] - series[idx], 0.0)
    return Dataset(values, kind, t_obs=float(t_obs))


def initial_correlation(traj: Trajectory, t: float) -> float:
    """Pearson correlation between the infectious profile at time t and the
    initial profile. Raises ZeroVarianceError when either profile is constant
    across nodes, so callers may skip the sample."""
    start = traj.infectious[0]
    now = traj.infectious[traj.report_index(t)]
    x = start - start.mean()
    y = now - now.mean()
    sx = float(x @ x)
    sy = float(y @ y)
    if sx == 0.0 or sy == 0.0:
        which = "initial" if sx == 0.0 else f"t={t}"
        raise ZeroVarianceError(f"infectious profile at {which} is constant across nodes")
    return float((x @ y) / math.sqrt(sx * sy))


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    """Export the reported series as CSV (time, node_label, S, I, R, J) and
    echo all run parameters into a .meta.json sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "node_label", "S", "I", "R", "J"])
        for k, t in enumerate(traj.times):
            for i, label in enumerate(traj.network.labels):
                writer.writerow(
                    [
                        repr(float(t)),
                        label,
                        repr(float(traj.susceptible[k, i])),
                        repr(float(traj.infectious[k, i])),
                        repr(float(traj.removed[k, i])),
                        repr(float(traj.cases[k, i])),
                    ]
                )
    sidecar = path.with_suffix(".meta.json")
    meta = {
        "alpha": traj.params.alpha,
        "beta": traj.params.beta,
        "gamma": traj.params.gamma,
        "source": traj.init.source,
        "index_cases": traj.init.index_cases,
        "population": traj.init.population,
        "t_end": float(traj.times[-1]),
        "sim_dt": traj.sim_dt,
        "report_dt": traj.report_dt,
        "seed": list(traj.seed),
        "noise": traj.noise,
        "nodes": traj.n_nodes,
        "labels": list(traj.network.labels),
        "checksum": traj.checksum(),
    }
    with open(sidecar, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
