"""Pinning-threshold bisection, quasistatic hysteresis loops, the
regularization study and seed ensembles.

Every experiment starts from the flat interface ``u = 0`` at ``t = 0`` and is
a deterministic function of its arguments, so reports can be replayed.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
import math
import os

import numpy as np

from . import serialize
from .analysis import check_stationary_subsolution, check_stationary_supersolution, mean_force_bound
from .errors import ContractError
from .obstacle_field import sample_field
from .solver import ForcingSpec, SolverConfig, State, TorusGrid, run_until

WORKERS_ENV = "DRYFRICTION_WORKERS"


def worker_count(workers=None):
    """Explicit ``workers``, else ``$DRYFRICTION_WORKERS``, else the logical core count."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _map(fn, items, workers):
    items = list(items)
    workers = min(worker_count(workers), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _grid_dict(grid):
    return {"n": grid.n, "m": grid.m}


# pinning threshold -------------------------------------------------------


def probe(field, grid, config, force, t_max=None):
    """Classify constant ``force`` from the flat start.

    A timeout is retried once by continuing the same run up to twice the
    horizon. Returns ``(RunResult, retried)``.
    """
    t_max = config.t_max if t_max is None else t_max
    forcing = ForcingSpec.constant(force)
    r = run_until(State.zeros(grid), field, forcing, config.replace(t_max=t_max), certain_escape=True)
    if r.outcome != "timeout":
        return r, False
    r2 = run_until(r.state, field, forcing, config.replace(t_max=2 * t_max), certain_escape=True)
    r2.steps += r.steps
    return r2, True


@dataclass
class PinningReport:
    """Bracket ``[F_lo, F_hi]`` around the depinning force of one field."""

    seed: int
    F_lo: float
    F_hi: float
    iterations: int
    doublings: int
    unresolved: bool
    probes: list
    profile: State
    certificates: dict
    obstacle: dict
    grid: dict
    config: dict
    F_init_hi: float

    @property
    def midpoint(self):
        return 0.5 * (self.F_lo + self.F_hi)

    @property
    def width(self):
        return self.F_hi - self.F_lo

    def outcome_at(self, force):
        for p in self.probes:
            if p["F"] == force:
                return p["outcome"]
        return None

    def violations(self):
        """Broken report invariants (empty for a valid, resolved report)."""
        out = []
        if self.unresolved:
            out.append("bracket unresolved")
        if not self.F_lo < self.F_hi:
            out.append("F_lo must be below F_hi")
        if self.outcome_at(self.F_lo) != "stationary":
            out.append("F_lo probe is not stationary")
        if self.outcome_at(self.F_hi) != "escaped":
            out.append("F_hi probe did not escape")
        for name, cert in self.certificates.items():
            if name in ("supersolution", "subsolution") and not cert["ok"]:
                out.append(f"{name} certificate fails at F_lo")
        return out

    def to_dict(self):
        return {
            "seed": int(self.seed),
            "F_lo": float(self.F_lo),
            "F_hi": float(self.F_hi),
            "F_init_hi": float(self.F_init_hi),
            "iterations": int(self.iterations),
            "doublings": int(self.doublings),
            "unresolved": bool(self.unresolved),
            "obstacle": self.obstacle,
            "grid": self.grid,
            "config": self.config,
            "certificates": self.certificates,
            "probes": self.probes,
            "profile": {"t": float(self.profile.t), "u": self.profile.u.tolist()},
        }

    def to_json(self):
        return serialize.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        grid = TorusGrid(int(d["grid"]["n"]), int(d["grid"]["m"]))
        return cls(
            seed=int(d["seed"]),
            F_lo=float(d["F_lo"]),
            F_hi=float(d["F_hi"]),
            iterations=int(d["iterations"]),
            doublings=int(d["doublings"]),
            unresolved=bool(d["unresolved"]),
            probes=list(d["probes"]),
            profile=State(grid, np.array(d["profile"]["u"], dtype=float), float(d["profile"]["t"])),
            certificates=dict(d["certificates"]),
            obstacle=dict(d["obstacle"]),
            grid=dict(d["grid"]),
            config=dict(d["config"]),
            F_init_hi=float(d["F_init_hi"]),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(serialize.loads(text))


def estimate_pinning_threshold(field, grid, config, F_init_hi=1.0, steps=10, max_doublings=4):
    """Bisect the constant force between pinned and depinned.

    Parameters
    ----------
    field : ObstacleField
    grid : TorusGrid
    config : SolverConfig
        ``config.t_max`` bounds each probe (doubled once on timeout).
    F_init_hi : float
        Initial upper end; doubled up to ``max_doublings`` times until it
        depins.
    steps : int
        Number of bisection steps, at least 6.

    Returns
    -------
    PinningReport
    """
    if not F_init_hi > 0:
        raise ContractError("F_init_hi must be positive")
    if steps < 6:
        raise ContractError("at least 6 bisection steps are required")
    probes = []

    def classify(force):
        r, retried = probe(field, grid, config, force)
        probes.append({
            "F": float(force),
            "outcome": r.outcome,
            "steps": int(r.steps),
            "t_end": float(r.state.t),
            "t_max": float(config.t_max),
            "retried": bool(retried),
        })
        return r

    unresolved = False
    r = classify(0.0)
    lo, profile = 0.0, r.state
    if r.outcome != "stationary":
        unresolved = True
    hi = float(F_init_hi)
    doublings = 0
    iterations = 0
    if not unresolved:
        while True:
            r = classify(hi)
            if r.outcome == "escaped":
                break
            if r.outcome == "timeout":
                unresolved = True
                break
            lo, profile = hi, r.state
            if doublings == max_doublings:
                unresolved = True
                break
            hi *= 2.0
            doublings += 1
    if not unresolved:
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            r = classify(mid)
            iterations += 1
            if r.outcome == "stationary":
                lo, profile = mid, r.state
            elif r.outcome == "escaped":
                hi = mid
            else:
                unresolved = True
                break
    tol = config.tol_pin
    certs = {
        "supersolution": check_stationary_supersolution(profile, field, lo, tol).to_dict(),
        "subsolution": check_stationary_subsolution(profile, field, lo, tol).to_dict(),
        "mean_force": mean_force_bound(profile, field, lo, tol),
    }
    return PinningReport(
        seed=int(field.spec.seed),
        F_lo=lo,
        F_hi=hi,
        iterations=iterations,
        doublings=doublings,
        unresolved=unresolved,
        probes=probes,
        profile=profile,
        certificates=certs,
        obstacle=field.spec.to_dict(),
        grid=_grid_dict(grid),
        config=config.to_dict(),
        F_init_hi=float(F_init_hi),
    )


def replay_bracket(report, field=None):
    """Re-run the two bracketing probes of ``report``.

    The field is re-sampled from the stored spec unless given. Returns a dict
    with both outcomes, whether they match the stored ones, and whether the
    pinned profile is reproduced bit for bit.
    """
    from .obstacle_field import ObstacleSpec

    if field is None:
        field = sample_field(ObstacleSpec.from_dict(report.obstacle))
    grid = TorusGrid(int(report.grid["n"]), int(report.grid["m"]))
    config = SolverConfig.from_dict(report.config)
    lo, _ = probe(field, grid, config, report.F_lo)
    hi, _ = probe(field, grid, config, report.F_hi)
    return {
        "lo_outcome": lo.outcome,
        "hi_outcome": hi.outcome,
        "ok": lo.outcome == "stationary" and hi.outcome == "escaped",
        "profile_identical": bool(np.array_equal(lo.state.u, report.profile.u)),
    }


# hysteresis ------------------------------------------------------------------


def relaxation_time(field, grid, force, config):
    """Time for the flat interface to come to rest under constant ``force``."""
    if force == 0:
        return 0.0
    r = run_until(State.zeros(grid), field, ForcingSpec.constant(force), config)
    if r.outcome != "stationary":
        raise ContractError(f"constant force {force} does not pin the interface ({r.outcome})")
    return float(r.state.t)


@dataclass
class HysteresisReport:
    amplitude: float
    period: float
    requested_period: float
    relaxation_time: float
    cycles: int
    samples: np.ndarray
    area: float
    closure_gap: float
    companion_period: float = math.nan
    companion_samples: np.ndarray = None
    sup_distance: float = math.nan
    depinned: bool = False
    meta: dict = dc_field(default_factory=dict)

    @staticmethod
    def _csv(samples):
        return serialize.csv_text(("t", "f", "mean_u"), samples)

    def samples_csv(self):
        return self._csv(self.samples)

    def companion_csv(self):
        return self._csv(self.companion_samples) if self.companion_samples is not None else None

    def to_dict(self):
        return {
            "amplitude": self.amplitude,
            "period": self.period,
            "requested_period": self.requested_period,
            "relaxation_time": self.relaxation_time,
            "cycles": self.cycles,
            "area": self.area,
            "closure_gap": self.closure_gap,
            "companion_period": self.companion_period,
            "sup_distance": self.sup_distance,
            "depinned": self.depinned,
            "meta": self.meta,
        }

    def to_json(self):
        return serialize.dumps(self.to_dict())


def loop_area(f, u):
    """Signed shoelace area of the closed polygon ``(f_k, u_k)``; positive
    when traversed counterclockwise."""
    f = np.asarray(f, dtype=float)
    u = np.asarray(u, dtype=float)
    return 0.5 * float(np.sum(f * np.roll(u, -1) - np.roll(f, -1) * u))


def _cycle_samples(field, grid, config, amplitude, quarter_steps, stride, cycles):
    dt = grid.dt(config.cfl_factor)
    period = 4 * quarter_steps * dt
    forcing = ForcingSpec.cycle(amplitude, period)
    cfg = config.replace(t_max=cycles * period)
    r = run_until(State.zeros(grid), field, forcing, cfg, stop_when_stationary=False, output_stride=stride)
    t = r.rows[:, 0]
    f = np.array([forcing.scalar(x) for x in t])
    return np.column_stack([t, f, r.rows[:, 1]]), r


def run_hysteresis(field, grid, amplitude, period, config, F_lo, *, cycles=2, samples_per_quarter=100,
                   relaxation=None, compare=True):
    """Triangle loading ``0 -> A -> -A -> A ...`` and the mean-height loop.

    Parameters
    ----------
    field, grid, config
        As for :func:`estimate_pinning_threshold`.
    amplitude : float
        Loading amplitude ``A``; must satisfy ``0 <= A <= F_lo``.
    period : float
        Requested period. It is rounded so that a quarter cycle is a whole
        number of recording strides, which puts every sample of the ``P`` and
        ``2P`` runs at the same loading phase.
    F_lo : float
        Pinned end of a threshold bracket for this field.
    cycles : int
        Full cycles to run (at least 2); the last one is analysed.
    relaxation : float, optional
        Relaxation time at constant ``A``; measured when omitted. Each
        quarter cycle must last at least ten of them.
    compare : bool
        Also run the ``2P`` companion and report the sup-distance between the
        last-cycle loops.
    """
    if not F_lo > 0:
        raise ContractError("hysteresis needs a positive pinning force F_lo")
    if amplitude < 0 or amplitude > F_lo:
        raise ContractError("amplitude must lie in [0, F_lo]")
    if cycles < 2:
        raise ContractError("at least 2 cycles are required")
    tau = relaxation_time(field, grid, amplitude, config) if relaxation is None else float(relaxation)
    if period / 4 < 10 * tau:
        raise ContractError(f"quarter period {period / 4} is shorter than 10 relaxation times ({10 * tau})")
    dt = grid.dt(config.cfl_factor)
    spq = int(samples_per_quarter)
    quarter_steps = max(1, int(round(period / (4 * dt * spq)))) * spq
    stride = quarter_steps // spq
    samples, r = _cycle_samples(field, grid, config, amplitude, quarter_steps, stride, cycles)
    eff_period = 4 * quarter_steps * dt
    report = HysteresisReport(
        amplitude=float(amplitude),
        period=eff_period,
        requested_period=float(period),
        relaxation_time=tau,
        cycles=int(cycles),
        samples=samples,
        area=math.nan,
        closure_gap=math.nan,
        meta={"dt": dt, "stride": stride, "quarter_steps": quarter_steps, "outcome": r.outcome},
    )
    if r.outcome == "escaped":
        report.depinned = True
        return report
    per_cycle = 4 * spq
    last = samples[-(per_cycle + 1):]
    report.area = loop_area(last[:-1, 1], last[:-1, 2])
    report.closure_gap = abs(float(last[-1, 2] - last[0, 2]))
    if compare:
        comp, r2 = _cycle_samples(field, grid, config, amplitude, 2 * quarter_steps, 2 * stride, cycles)
        report.companion_period = 2 * eff_period
        report.companion_samples = comp
        report.meta["companion_outcome"] = r2.outcome
        if r2.outcome == "escaped":
            report.depinned = True
            return report
        last2 = comp[-(per_cycle + 1):]
        report.sup_distance = float(np.max(np.abs(last2[:, 2] - last[:, 2])))
    return report


# regularization study ---------------------------------------------------


@dataclass
class EpsStudyReport:
    eps: list
    gaps: list
    monotone: bool
    force: float
    T_study: float

    @property
    def ratio(self):
        return self.gaps[-1] / self.gaps[0] if self.gaps[0] > 0 else 0.0

    def to_dict(self):
        return {"eps": self.eps, "gaps": self.gaps, "monotone": self.monotone, "force": self.force,
                "T_study": self.T_study, "ratio": self.ratio}

    def to_json(self):
        return serialize.dumps(self.to_dict())


def _eps_member(args):
    field, grid, force, config, eps, stride = args
    cfg = config if eps is None else config.replace(backend="regularized", epsilon=eps)
    r = run_until(State.zeros(grid), field, ForcingSpec.constant(force), cfg, stop_when_stationary=False,
                  check_escape=False, record_states=True, output_stride=stride)
    return r.snapshots


def epsilon_convergence_study(field, grid, force, eps_list, config, T_study=1.0, samples=50, workers=1):
    """Sup-norm gap between regularized and prox trajectories per ``eps``.

    All runs share grid, ``dt`` and recording times; the gap is the largest
    node-wise difference over the recorded states on ``[0, T_study]``.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ContractError("eps values must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ContractError("eps list must be strictly decreasing")
    config = config.replace(backend="prox", epsilon=None, t_max=T_study)
    dt = grid.dt(config.cfl_factor)
    stride = max(1, int(math.ceil(T_study / dt)) // int(samples))
    jobs = [(field, grid, force, config, e, stride) for e in [None] + eps_list]
    snaps = _map(_eps_member, jobs, workers)
    ref = snaps[0]
    gaps = [float(np.max(np.abs(s - ref))) for s in snaps[1:]]
    monotone = all(b <= a + 1e-10 for a, b in zip(gaps, gaps[1:]))
    return EpsStudyReport(eps_list, gaps, monotone, float(force), float(T_study))


# ensembles -----------------------------------------------------------------


def _ensemble_member(args):
    spec, seed, grid, config, F_init_hi, steps = args
    field = sample_field(spec.with_seed(seed))
    return estimate_pinning_threshold(field, grid, config, F_init_hi, steps).to_dict()


def ensemble_statistics(spec, seeds, grid, config, F_init_hi=1.0, steps=10, workers=None):
    """Threshold brackets for several field seeds and statistics of their
    midpoints. Unresolved brackets are excluded and counted."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 8:
        raise ContractError("an ensemble needs at least 8 seeds")
    reports = _map(_ensemble_member, [(spec, s, grid, config, F_init_hi, steps) for s in seeds], workers)
    brackets = [[r["F_lo"], r["F_hi"]] for r in reports]
    resolved = [0.5 * (r["F_lo"] + r["F_hi"]) for r in reports if not r["unresolved"]]
    mids = np.array(resolved)
    return {
        "seeds": seeds,
        "brackets": brackets,
        "unresolved": [bool(r["unresolved"]) for r in reports],
        "n_unresolved": sum(bool(r["unresolved"]) for r in reports),
        "midpoints": resolved,
        "mean": float(mids.mean()) if mids.size else math.nan,
        "variance": float(mids.var(ddof=1)) if mids.size > 1 else math.nan,
        "reports": reports,
    }


def grid_refinement(field, ms, config, F_init_hi=1.0, steps=10):
    """Threshold brackets of one realization on several grid sizes."""
    out = []
    for m in ms:
        rep = estimate_pinning_threshold(field, TorusGrid(field.spec.dimension, int(m)), config, F_init_hi, steps)
        out.append({"m": int(m), "F_lo": rep.F_lo, "F_hi": rep.F_hi, "unresolved": rep.unresolved})
    return out
