"""Experiment harness: configurations, trace emission, sweeps, benchmark.

A simulation run writes a CSV trace with the fixed schema
``step,t,x,y,z,amplitude,cg_iters,wall_time`` plus a plain-text dump of the
final control points and weights.  Amplitude is the y-displacement of the
tracked curve point from its initial height.  All state columns are
deterministic for a given configuration; wall-time columns are not.
"""

import csv
import os
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .assembly import AssemblyContext, GaussLegendreRule, PhysicsParams, gravity_field
from .constraints import ConstraintSpec, ReductionMap, build_reduction
from .dynamics import (
    DynamicsEngine,
    SolverConfig,
    WeightPolicy,
    initialize,
)
from .errors import ConfigError, DnurbsError, SimulationError
from .geometry import GeneralizedState, eval_curve
from .splines import KnotVector

TRACE_HEADER = ["step", "t", "x", "y", "z", "amplitude", "cg_iters", "wall_time"]

#: initial control polygon of the hanging-wire experiment (x, y, z, w rows)
WIRE_TABLE = (
    (-5.00, 5.0, 0.0, 1.0),
    (-4.17, 5.0, 0.0, 1.0),
    (-2.50, 5.0, 0.0, 1.0),
    (0.00, 5.0, 0.0, 1.0),
    (2.50, 5.0, 0.0, 1.0),
    (4.17, 5.0, 0.0, 1.0),
    (5.00, 5.0, 0.0, 1.0),
)
WIRE_KNOTS = (0, 0, 0, 0, 0.25, 0.50, 0.75, 1, 1, 1, 1)


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one simulation run."""

    order: int
    knots: tuple
    points: tuple
    weights: tuple
    alpha: float = 35.0
    beta: float = 10.0
    mu: float = 30.0
    gamma: float = 0.0
    gravity: float = 9.8
    dt: float = 0.008
    steps: int = 1000
    quadrature_points: int = 10
    pins: tuple = ()
    weight_policy: str = "reset_to_initial"
    track_u: float = 0.5
    initial_velocity: Optional[tuple] = None
    output: Optional[str] = None
    solver_tol: float = 1e-10
    solver_max_iter: Optional[int] = None

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")

    def knot_vector(self):
        return KnotVector(knots=self.knots, order=self.order)

    def initial_state(self):
        pts = np.asarray(self.points, dtype=float)
        return GeneralizedState(points=pts, weights=np.asarray(self.weights, dtype=float))

    def physics(self):
        return PhysicsParams(
            mu=self.mu,
            gamma=self.gamma,
            alpha=self.alpha,
            beta=self.beta,
            gravity=self.gravity,
        )

    def quadrature(self):
        return GaussLegendreRule(self.quadrature_points)

    def constraint_pins(self):
        """Configured pins, plus every weight when the policy pins weights."""
        pins = [(int(i), c) for i, c in self.pins]
        if self.weight_policy == "pinned":
            pinned_already = {(i, "w") for i, c in pins if c in ("w", 3)}
            m = len(self.weights)
            pins += [(i, "w") for i in range(m) if (i, "w") not in pinned_already]
        return pins

    def reduction(self):
        pins = self.constraint_pins()
        if not pins:
            return ReductionMap.identity(4 * len(self.weights))
        spec = ConstraintSpec.for_pins(pins, self.initial_state().p)
        return build_reduction(spec)

    def policy(self):
        if self.weight_policy == "reset_to_initial":
            return WeightPolicy.reset_to(np.asarray(self.weights, dtype=float))
        if self.weight_policy == "free":
            return WeightPolicy.free()
        if self.weight_policy == "pinned":
            return WeightPolicy.pinned()
        raise ConfigError(f"unknown weight policy {self.weight_policy!r}")

    def solver(self):
        return SolverConfig(tol=self.solver_tol, max_iter=self.solver_max_iter)

    def engine(self):
        params = self.physics()
        context = AssemblyContext(self.knot_vector(), params, self.quadrature())
        return DynamicsEngine(
            context=context,
            reduction=self.reduction(),
            solver=self.solver(),
            weight_policy=self.policy(),
            force_field=gravity_field(params),
        )

    def with_updates(self, **kwargs):
        return replace(self, **kwargs)


def wire_config(**overrides):
    """The hanging elastic wire: order 4, seven controls, clamped ends.

    Ends are clamped by pinning the positions of the first and last
    order-1 = 3 control points; weights stay active coordinates and are
    reset to 1 after every step by the default policy.
    """
    pins = tuple((i, c) for i in (0, 1, 2, 4, 5, 6) for c in "xyz")
    table = np.asarray(WIRE_TABLE)
    base = SimConfig(
        order=4,
        knots=WIRE_KNOTS,
        points=tuple(map(tuple, table[:, :3])),
        weights=tuple(table[:, 3]),
        pins=pins,
    )
    return base.with_updates(**overrides) if overrides else base


def straight_wire_config(num_controls, order=4, **overrides):
    """Scaled wire with ``num_controls`` evenly spaced control points.

    Used by the runtime study; clamps order-1 control positions at each end
    and keeps the uniform interior knot layout of the base experiment.
    """
    m, k = int(num_controls), int(order)
    if m < k + 2:
        raise ConfigError(f"need at least order+2 controls, got {m}")
    interior = np.linspace(0.0, 1.0, m - k + 2)[1:-1]
    knots = tuple(np.concatenate([np.zeros(k), interior, np.ones(k)]))
    xs = np.linspace(-5.0, 5.0, m)
    points = tuple((float(x), 5.0, 0.0) for x in xs)
    pins = tuple(
        (i, c)
        for i in list(range(k - 1)) + list(range(m - k + 1, m))
        for c in "xyz"
    )
    base = SimConfig(
        order=k,
        knots=knots,
        points=points,
        weights=(1.0,) * m,
        pins=pins,
    )
    return base.with_updates(**overrides) if overrides else base


@dataclass(frozen=True)
class TraceRecord:
    step: int
    t: float
    x: float
    y: float
    z: float
    amplitude: float
    cg_iters: int
    wall_time: float

    def row(self):
        return [
            self.step,
            repr(self.t),
            repr(self.x),
            repr(self.y),
            repr(self.z),
            repr(self.amplitude),
            self.cg_iters,
            repr(self.wall_time),
        ]


@dataclass(frozen=True)
class SimulationResult:
    records: tuple
    final_state: GeneralizedState
    config: SimConfig

    @property
    def amplitudes(self):
        return np.array([r.amplitude for r in self.records])


def final_state_path(output):
    base, _ = os.path.splitext(output)
    return base + "_final_state.txt"


def write_trace(records, output):
    with open(output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for record in records:
            writer.writerow(record.row())


def write_final_state(state, path):
    with open(path, "w") as fh:
        fh.write("# i x y z w\n")
        for i in range(state.num_controls):
            x, y, z = state.points[i]
            fh.write(f"{i} {x!r} {y!r} {z!r} {state.weights[i]!r}\n")


def run_simulation(config):
    """Run the configured step loop, tracking one curve point.

    Writes the CSV trace and a final-state dump when ``config.output`` is
    set.  On an engine failure the partial trace is flushed first and a
    SimulationError carrying the step index is raised.
    """
    kv = config.knot_vector()
    state0 = config.initial_state()
    engine = config.engine()
    v0 = (
        None
        if config.initial_velocity is None
        else np.asarray(config.initial_velocity, dtype=float)
    )
    sim = initialize(state0, v0, config.dt)

    def tracked(p_vec):
        return eval_curve(GeneralizedState.from_p(p_vec), kv, config.track_u)

    start_point = tracked(sim.p_curr)
    y0 = start_point[1]
    records = [
        TraceRecord(
            step=0,
            t=0.0,
            x=float(start_point[0]),
            y=float(start_point[1]),
            z=float(start_point[2]),
            amplitude=0.0,
            cg_iters=0,
            wall_time=0.0,
        )
    ]
    try:
        for _ in range(config.steps):
            tic = time.perf_counter()
            sim, diag = engine.step(sim)
            wall = time.perf_counter() - tic
            point = tracked(sim.p_curr)
            records.append(
                TraceRecord(
                    step=sim.step,
                    t=sim.t,
                    x=float(point[0]),
                    y=float(point[1]),
                    z=float(point[2]),
                    amplitude=float(point[1] - y0),
                    cg_iters=diag.cg_iterations,
                    wall_time=wall,
                )
            )
    except DnurbsError as exc:
        if config.output:
            write_trace(records, config.output)
        raise SimulationError(step=len(records), cause=exc) from exc

    final_state = GeneralizedState.from_p(sim.p_curr)
    if config.output:
        write_trace(records, config.output)
        write_final_state(final_state, final_state_path(config.output))
    return SimulationResult(
        records=tuple(records), final_state=final_state, config=config
    )


def local_maxima(series):
    """Indices of local maxima (first sample of any plateau)."""
    s = np.asarray(series, dtype=float)
    out = []
    for i in range(1, s.size - 1):
        if s[i] > s[i - 1] and s[i] >= s[i + 1]:
            out.append(i)
    return out


def peak_magnitudes(amplitudes):
    """Magnitudes of the local maxima of |amplitude|."""
    mags = np.abs(np.asarray(amplitudes, dtype=float))
    return [float(mags[i]) for i in local_maxima(mags)]


@dataclass(frozen=True)
class SweepEntry:
    parameter: str
    value: float
    peak_amplitude: float
    records: tuple


def run_sensitivity_sweep(base, parameter, values, out_dir=None):
    """Re-run the base configuration for each value of alpha or beta.

    Returns one entry per value with its trace and the peak amplitude
    magnitude.  An empty value list yields an empty report.
    """
    if parameter not in ("alpha", "beta"):
        raise ConfigError(f"sweep parameter must be alpha or beta, got {parameter!r}")
    entries = []
    for value in values:
        output = None
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            output = os.path.join(out_dir, f"{parameter}_{value:g}.csv")
        cfg = base.with_updates(**{parameter: float(value), "output": output})
        result = run_simulation(cfg)
        amps = result.amplitudes
        entries.append(
            SweepEntry(
                parameter=parameter,
                value=float(value),
                peak_amplitude=float(np.abs(amps).max()),
                records=result.records,
            )
        )
    return entries


@dataclass(frozen=True)
class BenchRecord:
    index: int
    n_controls: int
    iterations: int
    wall_time: float
    complexity: float
    rate_time: Optional[float]  # P: relative wall-time increment to the next config
    rate_complexity: Optional[float]  # P_hat: same for the complexity formula


BENCH_HEADER = ["j", "n_controls", "T", "C", "P", "P_hat"]

#: wall-clock floor below which a measurement is considered unresolvable
MIN_MEASURABLE_SECONDS = 1e-4


def _timed_run(config, iterations):
    engine = config.engine()
    sim = initialize(config.initial_state(), None, config.dt)
    engine.step(sim)  # warm caches outside the timed window
    sim = initialize(config.initial_state(), None, config.dt)
    tic = time.perf_counter()
    for _ in range(iterations):
        sim, _ = engine.step(sim)
    return time.perf_counter() - tic


def run_complexity_benchmark(
    order=4,
    n_gauss=5,
    control_counts=tuple(range(20, 145, 5)),
    iterations=360,
    alpha=35.0,
    beta=50.0,
    mu=30.0,
    gamma=1.0,
    dt=0.008,
):
    """Measure stepping wall time against the assembly complexity model.

    For configuration j the complexity model is
    C_j = iterations * n_e * n_gauss * n * order with n the control count and
    n_e = n - order + 1 elements.  Relative increments P (measured time) and
    P_hat (model) are emitted for every configuration but the last.
    """
    counts = [int(c) for c in control_counts]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ConfigError("control_counts must be strictly increasing")
    times = []
    actual_iters = []
    for m in counts:
        cfg = straight_wire_config(
            m,
            order=order,
            quadrature_points=n_gauss,
            alpha=alpha,
            beta=beta,
            mu=mu,
            gamma=gamma,
            dt=dt,
            steps=1,
        )
        runs = iterations
        wall = _timed_run(cfg, runs)
        while wall < MIN_MEASURABLE_SECONDS:
            warnings.warn(
                f"wall time {wall:.2e}s for {m} controls is below the measurable "
                f"floor; increasing iterations to {runs * 10}"
            )
            runs *= 10
            wall = _timed_run(cfg, runs)
        times.append(wall)
        actual_iters.append(runs)

    def complexity(m, runs):
        n_e = m - order + 1
        return float(runs * n_e * n_gauss * m * order)

    records = []
    comps = [complexity(m, runs) for m, runs in zip(counts, actual_iters)]
    for j, m in enumerate(counts):
        if j + 1 < len(counts):
            rate_t = (times[j + 1] - times[j]) / times[j]
            rate_c = (comps[j + 1] - comps[j]) / comps[j]
        else:
            rate_t = rate_c = None
        records.append(
            BenchRecord(
                index=j + 1,
                n_controls=m,
                iterations=actual_iters[j],
                wall_time=times[j],
                complexity=comps[j],
                rate_time=rate_t,
                rate_complexity=rate_c,
            )
        )
    return records


def write_bench_table(records, output):
    with open(output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.index,
                    r.n_controls,
                    repr(r.wall_time),
                    repr(r.complexity),
                    "" if r.rate_time is None else repr(r.rate_time),
                    "" if r.rate_complexity is None else repr(r.rate_complexity),
                ]
            )
