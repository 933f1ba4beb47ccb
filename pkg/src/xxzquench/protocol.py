"""Quench runs, peak extraction and parameter sweeps.

A run prepares the ground state of the uniform chain, switches the first bond
to ``J1`` and records ``C_{1,N}(t)`` on a regular grid. Sweeps repeat this
over one axis (``Delta``, ``J1``, ``N`` or initial temperature) and summarize
every trajectory by its first global maximum.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dmrg, ed
from . import mps as mpsmod
from .errors import CapacityError, DomainError, ParameterError, ToleranceError, XXZError
from .model import ModelParams, build_h0, build_h1
from .observables import check_bloch_vanishes, concurrence, correlators_from_rdm
from .trajectory import QuenchTrajectory

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 50.0
DEFAULT_SAMPLE_DT = 0.5
PEAK_TIE_TOL = 1e-6
VANISHING_C = 1e-3
XI_PREFACTOR = 1.35

__all__ = [
    "EngineConfig",
    "PeakSummary",
    "QuenchTrajectory",
    "SweepResult",
    "find_peak",
    "run_quench",
    "sweep_delta",
    "sweep_j1",
    "sweep_size",
    "sweep_temperature",
    "temperature_threshold",
    "thermal_trajectory",
    "validate_engines",
    "xi_baseline",
]


@dataclass(frozen=True)
class EngineConfig:
    """Engine selection and numerical settings.

    ``engine='auto'`` picks the exact engine up to ``auto_exact_max`` sites.
    ``ground_method`` selects how the MPS engine prepares the initial state.
    """

    engine: str = "auto"
    dt: float = 0.05
    m: int = 100
    weight_floor: float = 1e-12
    krylov_tol: float = 1e-10
    ed_cap: int = ed.STATE_CAP
    density_cap: int = ed.DENSITY_CAP
    auto_exact_max: int = 12
    ground_method: str = "dmrg"
    discarded_ceiling: float = 1e-8
    bloch_tol: float = 1e-6

    def __post_init__(self):
        problems = []
        if self.engine not in ("exact", "mps", "auto"):
            problems.append(f"engine must be exact, mps or auto, got {self.engine!r}")
        if self.ground_method not in ("dmrg", "imaginary"):
            problems.append(f"ground_method must be dmrg or imaginary, got {self.ground_method!r}")
        if not self.dt > 0:
            problems.append("dt must be positive")
        if self.m < 1:
            problems.append("m must be >= 1")
        if self.weight_floor < 0:
            problems.append("weight_floor must be >= 0")
        if problems:
            raise ParameterError("; ".join(problems))

    def resolve(self, N: int) -> str:
        if self.engine == "auto":
            return "exact" if N <= self.auto_exact_max else "mps"
        return self.engine


@dataclass(frozen=True)
class PeakSummary:
    c_max: float
    t_max: float
    attained_at_boundary: bool


@dataclass
class SweepResult:
    """One peak summary per axis value, sorted by axis value.

    ``failures`` maps axis values whose run raised to the error message;
    ``extras`` carries axis-specific analysis (argmax, fits, thresholds).
    """

    axis: str
    values: list
    summaries: list
    provenance: dict = field(default_factory=dict)
    trajectories: list | None = None
    failures: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def summary_for(self, value) -> PeakSummary:
        return self.summaries[self.values.index(value)]

    def c_max(self) -> np.ndarray:
        return np.array([s.c_max if s else np.nan for s in self.summaries])

    def t_max(self) -> np.ndarray:
        return np.array([s.t_max if s else np.nan for s in self.summaries])


def _grid(window: float, sample_dt: float) -> np.ndarray:
    if not window > 0:
        raise ParameterError(f"window must be positive, got {window}")
    if not sample_dt > 0:
        raise ParameterError(f"sample_dt must be positive, got {sample_dt}")
    n = int(math.floor(window / sample_dt + 1e-9))
    return sample_dt * np.arange(n + 1)


def _warnings_for(params: ModelParams) -> list[str]:
    out = []
    if params.N % 2:
        out.append("odd-N")
    if params.Delta <= -1:
        out.append("ferromagnetic-regime")
    return out


def _exact_quench(params, config, window, sample_dt):
    h0, h1 = build_h0(params), build_h1(params)
    warnings = _warnings_for(params)
    gs, e0 = ed.ground_state(h0, params.N, cap=config.ed_cap)
    if ed.is_ground_degenerate(h0, params.N, cap=config.ed_cap):
        warnings.append("degenerate-ground-state")
    prop = ed.SpectralPropagator(h1, gs.basis, config.krylov_tol)
    H = ed.sector_hamiltonian(h1, gs.basis)
    e_start = float(np.vdot(gs.amplitudes, H @ gs.amplitudes).real)
    times = _grid(window, sample_dt)
    values = []
    max_bloch = norm_drift = energy_drift = 0.0
    for t in times:
        amps = prop.apply(gs.amplitudes, t)
        norm_drift = max(norm_drift, abs(np.linalg.norm(amps) - 1))
        energy_drift = max(energy_drift, abs(np.vdot(amps, H @ amps).real - e_start))
        rho = ed.partial_trace_pair(ed.PureState(gs.basis, amps), 1, params.N)
        c = correlators_from_rdm(rho)
        max_bloch = max(max_bloch, check_bloch_vanishes(c, math.inf))
        values.append(concurrence(rho))
    if max_bloch > config.bloch_tol and "degenerate-ground-state" not in warnings:
        raise DomainError(f"single-site Bloch component {max_bloch:.3e} exceeds {config.bloch_tol:.1e}")
    return QuenchTrajectory(
        params=params,
        engine="exact",
        times=times,
        concurrence=np.array(values),
        max_bond=np.full(len(times), 2 ** (params.N // 2)),
        extras={
            "ground_energy": e0,
            "max_bloch": max_bloch,
            "sector_sz_twice": gs.basis.sz_twice,
            # the propagator acts inside one Sz sector, so Sz cannot drift
            "sz_drift": 0.0,
            "norm_drift": float(norm_drift),
            "energy_drift": float(energy_drift),
        },
        warnings=warnings,
    )


def prepare_mps_ground_state(params: ModelParams, config: EngineConfig):
    h0 = build_h0(params)
    if config.ground_method == "dmrg":
        return dmrg.dmrg_ground_state(h0, params.N, m_cap=config.m, weight_floor=config.weight_floor)
    return mpsmod.imaginary_time_ground_state(h0, params.N, m_cap=config.m, weight_floor=config.weight_floor)


def _mps_quench(params, config, window, sample_dt):
    every = sample_dt / config.dt
    measure_every = int(round(every))
    if abs(every - measure_every) > 1e-9 or measure_every < 1:
        raise ParameterError(f"sample_dt={sample_dt} is not a multiple of dt={config.dt}")
    state, e0 = prepare_mps_ground_state(params, config)
    measurer = mpsmod.EndToEndMeasurer(
        None if params.Delta <= -1 else config.bloch_tol
    )
    traj = mpsmod.evolve_real_time(
        state,
        build_h1(params),
        window,
        dt=config.dt,
        m_cap=config.m,
        measure_every=measure_every,
        measurer=measurer,
        weight_floor=config.weight_floor,
        discarded_ceiling=config.discarded_ceiling,
        params=params,
    )
    traj.warnings = _warnings_for(params) + traj.warnings
    traj.extras["ground_energy"] = e0
    return traj


def run_quench(
    params: ModelParams,
    engine_config: EngineConfig | None = None,
    window: float = DEFAULT_WINDOW,
    sample_dt: float = DEFAULT_SAMPLE_DT,
) -> QuenchTrajectory:
    """Concurrence between the chain ends after quenching the first bond."""
    config = engine_config or EngineConfig()
    engine = config.resolve(params.N)
    _grid(window, sample_dt)
    try:
        if engine == "exact":
            traj = _exact_quench(params, config, window, sample_dt)
        else:
            traj = _mps_quench(params, config, window, sample_dt)
    except XXZError as exc:
        exc.args = (f"{exc.args[0] if exc.args else exc} [N={params.N}, Delta={params.Delta}, J1={params.J1}]",)
        raise
    traj.provenance.update(
        engine=engine,
        window=float(window),
        sample_dt=float(sample_dt),
        **{k: v for k, v in asdict(config).items() if k != "engine"},
    )
    return traj


def find_peak(traj: QuenchTrajectory) -> PeakSummary:
    """Global maximum of the sampled series and the time it is first reached."""
    c = np.asarray(traj.concurrence)
    if c.size == 0:
        raise ParameterError("empty trajectory")
    c_max = float(c.max())
    first = int(np.flatnonzero(c >= c_max - PEAK_TIE_TOL)[0])
    # closer than one sample interval to the window end means the last sample
    boundary = c.size > 1 and first == c.size - 1
    return PeakSummary(c_max, float(traj.times[first]), bool(boundary))


# -- sweeps ------------------------------------------------------------------


def _point_job(args):
    params, config, window, sample_dt, keep = args
    try:
        traj = run_quench(params, config, window, sample_dt)
    except XXZError as exc:
        return None, None, f"{type(exc).__name__}: {exc}"
    return find_peak(traj), (traj if keep else None), None


def _run_points(jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point_job, jobs))
    return [_point_job(j) for j in jobs]


def _sweep(axis, grid, make_params, config, window_for, sample_dt, keep, workers):
    values = sorted(set(float(v) if axis != "N" else int(v) for v in grid))
    jobs = [(make_params(v), config, window_for(v), sample_dt, keep) for v in values]
    results = _run_points(jobs, workers)
    summaries, trajs, failures = [], [], {}
    for v, (summary, traj, err) in zip(values, results):
        summaries.append(summary)
        trajs.append(traj)
        if err:
            failures[v] = err
            log.warning("%s=%s failed: %s", axis, v, err)
    prov = {k: v for k, v in asdict(config).items()}
    prov.update(sample_dt=float(sample_dt), axis=axis)
    return SweepResult(axis, values, summaries, prov, trajs if keep else None, failures)


def _argmax(result: SweepResult):
    c = result.c_max()
    if np.all(np.isnan(c)):
        return None
    return result.values[int(np.nanargmax(c))]


def sweep_delta(
    delta_grid,
    base_params: ModelParams,
    engine_config: EngineConfig | None = None,
    window: float = DEFAULT_WINDOW,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    keep_trajectories: bool = False,
    workers: int = 1,
) -> SweepResult:
    config = engine_config or EngineConfig()
    res = _sweep(
        "Delta", delta_grid, lambda d: base_params.replace(Delta=d), config,
        lambda _: window, sample_dt, keep_trajectories, workers,
    )
    res.provenance.update(window=float(window), N=base_params.N, J1=base_params.J1, J=base_params.J)
    res.extras["argmax"] = _argmax(res)
    return res


def _relative_spread(x):
    x = np.asarray([v for v in x if np.isfinite(v)])
    if x.size == 0 or x.mean() == 0:
        return float("nan")
    return float((x.max() - x.min()) / x.mean())


def sweep_j1(
    j1_grid,
    base_params: ModelParams,
    engine_config: EngineConfig | None = None,
    window: float = DEFAULT_WINDOW,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    allow_zero: bool = False,
    keep_trajectories: bool = False,
    workers: int = 1,
) -> SweepResult:
    """Sweep the quenched coupling.

    Extras: ``argmax``; ``t_max_spread`` and ``t_max_spread_negative``, the
    relative spread ``(max - min) / mean`` of ``t_max`` over points with a
    trusted, non-vanishing peak (all of them, and those with ``J1 < 0``).
    """
    if not allow_zero and any(float(v) == 0 for v in j1_grid):
        raise ParameterError("J1 = 0 decouples the first spin; pass allow_zero=True to include it")
    config = engine_config or EngineConfig()
    res = _sweep(
        "J1", j1_grid, lambda j: base_params.replace(J1=j), config,
        lambda _: window, sample_dt, keep_trajectories, workers,
    )
    res.provenance.update(window=float(window), N=base_params.N, Delta=base_params.Delta, J=base_params.J)
    res.extras["argmax"] = _argmax(res)
    usable = [
        (v, s) for v, s in zip(res.values, res.summaries)
        if s and not s.attained_at_boundary and s.c_max >= VANISHING_C
    ]
    res.extras["t_max_spread"] = _relative_spread([s.t_max for _, s in usable])
    res.extras["t_max_spread_negative"] = _relative_spread([s.t_max for v, s in usable if v < 0])
    return res


def linear_fit(x, y) -> dict:
    """Least-squares line with coefficient of determination."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 2:
        return {"slope": float("nan"), "intercept": float("nan"), "r2": float("nan"), "points": int(x.size)}
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2, "points": int(x.size)}


def xi_baseline(N) -> float:
    """Reference end-to-end entanglement scale ``1.35 * N**(-1/3)``."""
    if N < 1:
        raise ParameterError("N must be >= 1")
    return XI_PREFACTOR * N ** (-1.0 / 3.0)


def size_window(N: int, J: float = 1.0) -> float:
    return float(math.ceil(1.2 * N / abs(J)))


def sweep_size(
    n_grid,
    base_params: ModelParams,
    engine_config: EngineConfig | None = None,
    window: float | None = None,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    keep_trajectories: bool = False,
    workers: int = 1,
) -> SweepResult:
    """Sweep the chain length.

    ``window=None`` uses ``ceil(1.2 N / J)`` per point. Extras: ``fit`` of
    ``t_max`` against ``N`` over trusted points, ``xi`` table and the list of
    ``odd_sizes`` (flagged, not excluded).
    """
    config = engine_config or EngineConfig()
    res = _sweep(
        "N", n_grid, lambda n: base_params.replace(N=int(n)), config,
        (lambda n: size_window(n, base_params.J)) if window is None else (lambda _: window),
        sample_dt, keep_trajectories, workers,
    )
    res.provenance.update(
        window="ceil(1.2*N/J)" if window is None else float(window),
        Delta=base_params.Delta, J1=base_params.J1, J=base_params.J,
    )
    trusted = [(n, s) for n, s in zip(res.values, res.summaries) if s and not s.attained_at_boundary]
    res.extras["fit"] = linear_fit([n for n, _ in trusted], [s.t_max for _, s in trusted])
    res.extras["excluded"] = [n for n in res.values if n not in [t for t, _ in trusted]]
    res.extras["xi"] = {n: xi_baseline(n) for n in res.values}
    res.extras["odd_sizes"] = [n for n in res.values if n % 2]
    return res


def thermal_trajectory(
    params: ModelParams,
    kT: float,
    window: float = DEFAULT_WINDOW,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    density_cap: int = ed.DENSITY_CAP,
    propagator: ed.DensityPropagator | None = None,
) -> QuenchTrajectory:
    """Quench starting from the Gibbs state of the uniform chain at ``kT``."""
    if params.N > density_cap:
        raise CapacityError(f"thermal runs limited to N <= {density_cap}")
    rho0 = ed.thermal_density(build_h0(params), params.N, kT, cap=density_cap)
    prop = propagator or ed.DensityPropagator(build_h1(params), params.N, cap=density_cap)
    times = _grid(window, sample_dt)
    values = [concurrence(ed.partial_trace_pair(prop.apply(rho0, t), 1, params.N)) for t in times]
    return QuenchTrajectory(
        params=params, engine="exact", times=times, concurrence=np.array(values),
        extras={"kT": kT}, provenance={"window": window, "sample_dt": sample_dt},
    )


def sweep_temperature(
    kt_grid,
    base_params: ModelParams,
    window: float = DEFAULT_WINDOW,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    density_cap: int = ed.DENSITY_CAP,
    keep_trajectories: bool = False,
) -> SweepResult:
    """Peak concurrence against initial temperature (exact engine only).

    ``extras['threshold']`` is the smallest grid temperature whose peak falls
    below 1e-3, or ``None`` if every point stays entangled.
    """
    if any(not float(k) > 0 for k in kt_grid):
        raise ParameterError("every kT must be positive")
    if base_params.N > density_cap:
        raise CapacityError(f"thermal runs limited to N <= {density_cap}")
    values = sorted(set(float(k) for k in kt_grid))
    prop = ed.DensityPropagator(build_h1(base_params), base_params.N, cap=density_cap)
    summaries, trajs = [], []
    for kT in values:
        traj = thermal_trajectory(base_params, kT, window, sample_dt, density_cap, prop)
        summaries.append(find_peak(traj))
        trajs.append(traj)
    res = SweepResult(
        "kT", values, summaries,
        provenance={"engine": "exact", "window": float(window), "sample_dt": float(sample_dt),
                    "N": base_params.N, "Delta": base_params.Delta, "J1": base_params.J1, "J": base_params.J},
        trajectories=trajs if keep_trajectories else None,
    )
    res.extras["threshold"] = next((v for v, s in zip(values, summaries) if s.c_max < VANISHING_C), None)
    return res


def temperature_threshold(
    base_params: ModelParams,
    lo: float,
    hi: float,
    tol: float = 1e-3,
    window: float = DEFAULT_WINDOW,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    density_cap: int = ed.DENSITY_CAP,
) -> float:
    """Bisect the temperature where the peak concurrence drops below 1e-3.

    ``lo`` must still show entanglement and ``hi`` must not.
    """
    prop = ed.DensityPropagator(build_h1(base_params), base_params.N, cap=density_cap)

    def peak(kT):
        return find_peak(thermal_trajectory(base_params, kT, window, sample_dt, density_cap, prop)).c_max

    if peak(lo) < VANISHING_C or peak(hi) >= VANISHING_C:
        raise ParameterError(f"threshold not bracketed by [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if peak(mid) < VANISHING_C:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def validate_engines(
    params: ModelParams,
    engine_config: EngineConfig | None = None,
    window: float = 30.0,
    sample_dt: float = DEFAULT_SAMPLE_DT,
    tol: float = 1e-3,
    raise_on_breach: bool = True,
) -> dict:
    """Run both engines on the same point and compare the concurrence series."""
    config = engine_config or EngineConfig()
    exact = run_quench(params, EngineConfig(**{**asdict(config), "engine": "exact"}), window, sample_dt)
    approx = run_quench(params, EngineConfig(**{**asdict(config), "engine": "mps"}), window, sample_dt)
    dev = np.abs(exact.concurrence - approx.concurrence)
    pe, pm = find_peak(exact), find_peak(approx)
    report = {
        "N": params.N,
        "max_deviation": float(dev.max()),
        "t_of_max_deviation": float(exact.times[int(dev.argmax())]),
        "c_max_exact": pe.c_max,
        "c_max_mps": pm.c_max,
        "t_max_exact": pe.t_max,
        "t_max_mps": pm.t_max,
        "discarded_weight": float(approx.discarded_weight[-1]),
        "tolerance": tol,
        "passed": bool(dev.max() <= tol),
    }
    if raise_on_breach and not report["passed"]:
        raise ToleranceError(
            f"engines differ by {report['max_deviation']:.3e} > {tol:.1e} at t={report['t_of_max_deviation']}"
        )
    return report


def static_end_to_end_concurrence(params: ModelParams, cap: int = ed.STATE_CAP) -> float:
    gs, _ = ed.ground_state(build_h0(params), params.N, cap=cap)
    return concurrence(ed.partial_trace_pair(gs, 1, params.N))
