"""Structural-stability certificates, saddle connections and generic perturbation.

A flow is certified stable when all zeros, poles and critical points are
simple and no trajectory joins two critical points. Connections are ruled
out cheaply by looking at critical values (a connection forces equal
``arg f`` at both ends) and otherwise by tracing unstable separatrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .efun import EllipticFunction, validate_divisor
from .equilibria import (
    Circle,
    CountError,
    Equilibrium,
    count_by_argument_principle,
    critical_points,
    find_equilibria,
)
from .flow import FlowField, IntegrationError, Trajectory, integrate
from .weierstrass import PoleError

__all__ = [
    "StabilityCertificate",
    "Connection",
    "ConnectionReport",
    "PerturbationConfig",
    "PerturbationError",
    "critical_value_screen",
    "arg_screen",
    "detect_saddle_connections",
    "unstable_seeds",
    "stable_seeds",
    "certify",
    "sensitivity",
    "perturb_to_generic",
    "EXIT_CODES",
]

SEPARATRIX_OFFSET = 1e-5  # cell-relative
HIT_RADIUS = 1e-4  # cell-relative
HIT_ARG_TOL = 1e-5
SCREEN_TOL = 1e-9
ARG_SCREEN_TOL = 1e-6

EXIT_CODES = {"stable": 0, "degenerate": 1, "undecided": 2}


# -- screens ---------------------------------------------------------------


def _values(critical) -> list[complex]:
    return [e.value if isinstance(e, Equilibrium) else complex(e) for e in critical]


def critical_value_screen(f: EllipticFunction | None, critical_points) -> bool:
    """True iff no line through two critical values passes through 0.

    ``critical_points`` may be equilibria or plain critical values. A true
    result rules out saddle connections; false is inconclusive.
    """
    vals = _values(critical_points)
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            v1, v2 = vals[i], vals[j]
            d = v2 - v1
            scale = max(abs(v1), abs(v2))
            if d == 0:
                return False
            # distance from 0 to the line through v1, v2
            dist = abs((np.conj(d) * v1).imag) / abs(d)
            if dist <= SCREEN_TOL * scale:
                return False
    return True


def arg_screen(critical_points, tol: float = ARG_SCREEN_TOL) -> bool:
    """True iff all critical values have pairwise different arguments.

    Sharper than :func:`critical_value_screen`: values ``v`` and ``-v`` lie
    on a line through 0 but cannot be joined by a trajectory.
    """
    args = [float(np.angle(v)) for v in _values(critical_points)]
    for i in range(len(args)):
        for j in range(i + 1, len(args)):
            d = (args[i] - args[j] + math.pi) % (2 * math.pi) - math.pi
            if abs(d) <= tol:
                return False
    return True


# -- separatrix tracing ----------------------------------------------------


@dataclass
class Connection:
    source: Equilibrium
    target: Equilibrium
    arg_value: float
    trajectory: Trajectory

    def to_json(self) -> dict:
        return {
            "type": "connection",
            "source": [self.source.location.real, self.source.location.imag],
            "target": [self.target.location.real, self.target.location.imag],
            "arg": self.arg_value,
            "source_arg": self.source.arg_value,
            "target_arg": self.target.arg_value,
        }


@dataclass
class ConnectionReport:
    """Connections found, separatrices left undecided, and all traced orbits."""

    connections: list[Connection]
    undecided: list[tuple[Equilibrium, Trajectory | None]]
    separatrices: list[Trajectory]

    def __iter__(self):
        return iter(self.connections)

    def __len__(self):
        return len(self.connections)

    @property
    def decided(self) -> bool:
        return not self.undecided


def unstable_seeds(field: FlowField, saddle: Equilibrium, offset: float = SEPARATRIX_OFFSET):
    """Two seed points on the local unstable manifold of a simple saddle."""
    return _eigen_seeds(field, saddle, offset, unstable=True)


def stable_seeds(field: FlowField, saddle: Equilibrium, offset: float = SEPARATRIX_OFFSET):
    """Two seed points on the local stable manifold of a simple saddle."""
    return _eigen_seeds(field, saddle, offset, unstable=False)


def _eigen_seeds(field, saddle, offset, unstable):
    J = field.jacobian(saddle.location)
    w, V = np.linalg.eig(J)
    i = int(np.argmax(w.real)) if unstable else int(np.argmin(w.real))
    v = V[:, i].real
    d = complex(v[0], v[1])
    d /= abs(d)
    # fix the sign for reproducible ordering
    if d.real < 0 or (d.real == 0 and d.imag < 0):
        d = -d
    h = offset * field.lattice.scale_length
    return [saddle.location + h * d, saddle.location - h * d]


def detect_saddle_connections(
    field: FlowField,
    saddles,
    equilibria=None,
    hit_radius: float = HIT_RADIUS,
    hit_arg_tol: float = HIT_ARG_TOL,
    **kwargs,
) -> ConnectionReport:
    """Trace both unstable separatrices of every saddle forward.

    A separatrix ending within the hit radius of a saddle with matching
    ``arg f`` (or captured by one) is a connection; one that runs out of
    budget is undecided. Extra keyword arguments go to :func:`integrate`.
    """
    if equilibria is None:
        equilibria = field.equilibria
    saddles = list(saddles)
    if any(s.multiplicity != 1 for s in saddles):
        raise ValueError("separatrix tracing needs simple saddles")
    conns, undecided, traces = [], [], []
    for s in saddles:
        for seed in unstable_seeds(field, s):
            try:
                tr = integrate(
                    field,
                    seed,
                    "forward",
                    equilibria=equilibria,
                    targets=saddles,
                    exclude=s,
                    hit_radius=hit_radius,
                    hit_arg_tol=hit_arg_tol,
                    **kwargs,
                )
            except IntegrationError as exc:
                undecided.append((s, exc.trajectory))
                continue
            tr.meta["source"] = s
            # the seed lies on the saddle's level line of arg f
            tr.argf = tr.argf - tr.argf[0] + _nearest_branch(s.arg_value, tr.argf[0])
            traces.append(tr)
            if tr.status == "connection" or (
                tr.status == "converged" and tr.endpoint is not None and tr.endpoint.kind == "critical"
            ):
                conns.append(Connection(s, tr.endpoint, float(tr.argf[-1]), tr))
            elif tr.status != "converged":
                undecided.append((s, tr))
    return ConnectionReport(conns, undecided, traces)


def _nearest_branch(a: float, b: float) -> float:
    """``a + 2 pi k`` closest to ``b``."""
    return a + 2 * math.pi * round((b - a) / (2 * math.pi))


# -- certificates ----------------------------------------------------------


@dataclass
class StabilityCertificate:
    verdict: str  # "stable" | "degenerate" | "undecided"
    conditions: dict
    witnesses: list = dc_field(default_factory=list)
    screen_passed: bool = False
    arg_screen_passed: bool = False
    nuclear: bool = False
    seed: int | None = None
    equilibria: list = dc_field(default_factory=list)
    report: ConnectionReport | None = None

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    @property
    def connections(self) -> list[Connection]:
        return [] if self.report is None else self.report.connections

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "conditions": dict(self.conditions),
            "witnesses": list(self.witnesses),
            "screen_passed": self.screen_passed,
            "arg_screen_passed": self.arg_screen_passed,
            "nuclear": self.nuclear,
            "seed": self.seed,
        }


def _node_witness(f, e: Equilibrium) -> dict:
    L = f.lattice
    others = [p for p in f.divisor.points if L.distance(p, e.location) > 0]
    rho = 0.25 * min([L.distance(e.location, p) for p in others] + [0.1 * L.scale_length])
    try:
        k = count_by_argument_principle(f.eval, f.eval_deriv, Circle(e.location, rho))
    except (CountError, PoleError):
        k = None
    return {
        "type": f"multiple_{e.kind}",
        "z": [e.location.real, e.location.imag],
        "mult": e.multiplicity,
        "argument_principle": None if k is None else abs(k),
    }


def certify(
    f: EllipticFunction,
    *,
    equilibria=None,
    trace_degenerate: bool = False,
    seed: int | None = None,
    **trace_kwargs,
) -> StabilityCertificate:
    """Check simplicity of all equilibria and the absence of saddle connections.

    Connections are first excluded by the critical-value screens and
    otherwise by separatrix tracing. When the multiplicity conditions already
    fail, tracing is skipped unless ``trace_degenerate`` is set, and the
    connection condition is reported as ``None`` (not evaluated).

    A function with one ``r``-fold zero and one ``r``-fold pole (a nuclear
    divisor) passes the first condition: its two nodes are the only
    equilibria of their kind and the flow is stable whenever its two saddles
    are simple and unconnected.
    """
    eqs = find_equilibria(f) if equilibria is None else list(equilibria)
    d = f.divisor
    nuclear = d.A == 1 and d.B == 1 and f.shift == 0
    nodes = [e for e in eqs if e.kind in ("zero", "pole")]
    saddles = [e for e in eqs if e.kind == "critical"]
    witnesses = []
    multiple_nodes = [e for e in nodes if e.multiplicity > 1]
    simple_nodes = nuclear or not multiple_nodes
    if not simple_nodes:
        witnesses.extend(_node_witness(f, e) for e in multiple_nodes)
    multiple_saddles = [e for e in saddles if e.multiplicity > 1]
    simple_saddles = not multiple_saddles
    for e in multiple_saddles:
        witnesses.append(
            {
                "type": "multiple_critical",
                "z": [e.location.real, e.location.imag],
                "mult": e.multiplicity,
                "argument_principle": e.multiplicity,
            }
        )
    screen = critical_value_screen(f, saddles) if simple_saddles else False
    ascreen = arg_screen(saddles) if simple_saddles else False
    report = None
    no_conn: bool | None
    if not simple_saddles:
        no_conn = None
    elif screen or ascreen:
        no_conn = True
    elif not simple_nodes and not trace_degenerate:
        no_conn = None
    else:
        field = FlowField(f, "pq")
        report = detect_saddle_connections(field, saddles, equilibria=eqs, **trace_kwargs)
        if report.connections:
            no_conn = False
            witnesses.extend(c.to_json() for c in report.connections)
        elif report.undecided:
            no_conn = None
            for s, _ in report.undecided:
                witnesses.append(
                    {"type": "undecided", "source": [s.location.real, s.location.imag]}
                )
        else:
            no_conn = True
    conditions = {
        "simple_zeros_poles": bool(simple_nodes),
        "simple_critical_points": bool(simple_saddles),
        "no_saddle_connections": no_conn,
    }
    if not simple_nodes or not simple_saddles or no_conn is False:
        verdict = "degenerate"
    elif no_conn is None:
        verdict = "undecided"
    else:
        verdict = "stable"
    return StabilityCertificate(
        verdict, conditions, witnesses, bool(screen), bool(ascreen), nuclear, seed, eqs, report
    )


# -- sensitivity -----------------------------------------------------------


def sensitivity(f: EllipticFunction, z: complex, index, form: str = "wp") -> complex:
    """Partial derivative of ``w'(z)`` with respect to one divisor point.

    ``index`` is ``("a", i)`` for the zero ``a_i`` or ``("b", j)`` for the
    pole ``b_j`` with ``j < B - 1``; the last pole moves with the others so
    that ``lambda0`` stays fixed. ``form`` selects the wp-difference
    (``"wp"``) or the sigma addition-theorem (``"sigma"``) expression.
    """
    d = f.divisor
    L = f.lattice
    z = complex(z)
    for p in d.points:
        if L.distance(z, p) < 1e-7 * L.scale_length:
            raise ValueError("z is congruent to a zero or pole")
    kind, i = index
    bB, _ = d.poles[-1]
    if kind == "a":
        c, n = d.zeros[i]
        coef = -n
    elif kind == "b":
        if not 0 <= i < d.B - 1:
            raise IndexError("pole index must be below B - 1 (the last pole is dependent)")
        c, m = d.poles[i]
        coef = m
    else:
        raise ValueError("index kind must be 'a' or 'b'")
    W = f._w
    if form == "wp":
        return complex(coef * (W.wp(z - c) - W.wp(z - bB)))
    if form == "sigma":
        s = W.sigma
        num = s(c - bB) * s(2 * z - c - bB)
        den = s(z - c) ** 2 * s(z - bB) ** 2
        return complex(coef * num / den)
    raise ValueError("form must be 'wp' or 'sigma'")


# -- perturbation ----------------------------------------------------------


@dataclass(frozen=True)
class PerturbationConfig:
    epsilon: float = 1e-3
    seed: int = 0
    max_retries: int = 20

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")

    def check(self, f: EllipticFunction):
        sep = f.divisor.min_separation()
        if not self.epsilon < sep / 2:
            raise ValueError(
                f"epsilon {self.epsilon} must be below half the minimal divisor separation {sep}"
            )


class PerturbationError(RuntimeError):
    def __init__(self, msg, certificate=None):
        super().__init__(msg)
        self.certificate = certificate


def _split(rng, center, n, eps, jitter):
    """``n`` points equally spaced around ``center`` (or one point jittered)."""
    if n == 1:
        r = jitter * math.sqrt(rng.random())
        return [center + r * np.exp(2j * math.pi * rng.random())]
    rho = eps * (0.25 + 0.25 * rng.random())
    phi = 2 * math.pi * rng.random()
    out = []
    for j in range(n):
        r = jitter * math.sqrt(rng.random())
        out.append(center + rho * np.exp(1j * (phi + 2 * math.pi * j / n)) + r * np.exp(2j * math.pi * rng.random()))
    return out


def _draw(f: EllipticFunction, rng, eps) -> EllipticFunction:
    d = f.divisor
    npts = sum(n for _, n in d.zeros) + sum(m for _, m in d.poles)
    jitter = eps / (4 * npts)
    zeros = [(z, 1) for a, n in d.zeros for z in _split(rng, a, n, eps, jitter)]
    poles = [(z, 1) for b, m in d.poles[:-1] for z in _split(rng, b, m, eps, jitter)]
    bB, mB = d.poles[-1]
    last = _split(rng, bB, mB, eps, jitter)
    poles += [(z, 1) for z in last[:-1]]
    # close the sum condition through the last point with lambda0 fixed
    closing = sum(a for a, _ in zeros) - sum(b for b, _ in poles) - d.lambda0
    poles.append((complex(closing), 1))
    nd = validate_divisor(d.lattice, zeros, poles)
    if nd.lambda0_index != d.lambda0_index:
        raise ArithmeticError("lambda0 changed during the split")
    return EllipticFunction(nd, f.C, f.shift)


def _displacement(orig: EllipticFunction, new: EllipticFunction) -> float:
    """Largest distance of a new divisor point to the original point it came from."""
    L = orig.lattice
    worst = 0.0
    for new_pts, old_pts in (
        (_current_zeros(new), _current_zeros(orig)),
        (new.divisor.pole_points, orig.divisor.pole_points),
    ):
        for z in new_pts:
            worst = max(worst, float(np.min(L.distance(z, np.asarray(old_pts)))))
    return worst


def _current_zeros(f: EllipticFunction):
    from .efun import recover_zeros

    return np.array(recover_zeros(f), dtype=complex)


def perturb_to_generic(f: EllipticFunction, config: PerturbationConfig = PerturbationConfig()):
    """Move ``f`` into the non-degenerate set by an ``epsilon``-small change.

    Multiple zeros and poles are split and every point is jittered, with the
    last pole absorbing the change so that ``lambda0`` is unchanged; draws with
    multiple critical points are redrawn. Remaining connections are broken by
    adding a small constant. Returns ``(g, certificate)``.
    """
    config.check(f)
    cert = certify(f, seed=config.seed)
    if cert.stable:
        return f, cert
    eps = config.epsilon
    rng = np.random.default_rng(config.seed)
    needs_split = not (cert.conditions["simple_zeros_poles"] and cert.conditions["simple_critical_points"])
    last = cert
    for _ in range(config.max_retries):
        if needs_split:
            g = _draw(f, rng, eps)
            try:
                crit = critical_points(g)
            except ArithmeticError:
                continue
            if any(e.multiplicity > 1 for e in crit):
                continue
            try:
                cg = certify(g, seed=config.seed)
            except ArithmeticError:
                continue
        else:
            g, cg = f, cert
            crit = [e for e in cert.equilibria if e.kind == "critical"]
        last = cg
        if cg.stable:
            return g, cg
        if not cg.conditions["simple_zeros_poles"]:
            continue
        # stage 3: a constant keeps the critical points and moves the values
        vmin = min(abs(e.value) for e in crit)
        mag = eps * vmin * (0.1 + 0.9 * rng.random())
        c = mag * np.exp(2j * math.pi * rng.random())
        for _shrink in range(6):
            h = g.add_constant(c)
            try:
                ok = _displacement(f, h) <= 2 * eps
                ch = certify(h, seed=config.seed) if ok else None
            except ArithmeticError:
                ok, ch = False, None
            if ch is not None:
                last = ch
                if ch.stable:
                    return h, ch
            c = c / 10
        needs_split = True
    raise PerturbationError("no stable perturbation found within max_retries", last)
