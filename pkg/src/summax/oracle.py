"""Independent cross-checks for the engines: Monte Carlo sampling, exhaustive
enumeration and pointwise nested quadrature.

None of this code shares logic with the recurrence engines. The Monte Carlo
path samples every variable by inverse transform and counts events with
integer accumulators, batch by batch, so a fixed seed gives bit-identical
reports on any platform. Enumeration walks the full outcome lattice of
bounded (or truncated) integer models in flat-index chunks. The quadrature
path evaluates the joint CDF by direct tensor integration. ``compare`` turns
an engine output plus an oracle report into a pass/fail verdict under a
TolerancePolicy: absolute slack plus a multiple of the Monte Carlo standard
error where one exists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cont_engine import cdf_direct_smalln
from .disc_engine import PmfTriangle, cdf_direct_smalln_discrete
from .errors import OracleError
from .models import ContinuousModel, DiscreteModel, model_fingerprint, sample

__all__ = [
    "TolerancePolicy",
    "PointRecord",
    "OracleReport",
    "mc_joint_cdf",
    "mc_papr_prob",
    "enumerate_discrete_joint",
    "quadrature_joint_cdf",
    "compare",
]

_BATCH = 1 << 18


@dataclass(frozen=True)
class TolerancePolicy:
    """Pass threshold |engine - oracle| <= absolute + sigma * stderr."""

    absolute: float = 0.0
    sigma: float = 3.0


@dataclass
class PointRecord:
    coords: tuple
    oracle_value: float
    engine_value: float | None = None
    stderr: float | None = None
    diff: float | None = None
    ok: bool | None = None

    def to_json_dict(self) -> dict:
        return {
            "coords": list(self.coords),
            "oracle_value": self.oracle_value,
            "engine_value": self.engine_value,
            "stderr": self.stderr,
            "diff": self.diff,
            "ok": self.ok,
        }


@dataclass
class OracleReport:
    """Outcome of one oracle run or one engine-vs-oracle comparison."""

    method: str  # "monte_carlo" | "enumeration" | "nested_quadrature"
    max_abs_diff: float = 0.0
    tv_distance: float | None = None
    sample_count: int | None = None
    state_count: int | None = None
    per_point: list[PointRecord] = field(default_factory=list)
    violations: int = 0
    passed: bool = True

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "max_abs_diff": self.max_abs_diff,
            "tv_distance": self.tv_distance,
            "sample_count": self.sample_count,
            "state_count": self.state_count,
            "violations": self.violations,
            "passed": self.passed,
            "per_point": [p.to_json_dict() for p in self.per_point],
        }


def _check_models(models, op):
    if not models:
        raise OracleError(f"{op} needs at least one model")
    for m in models:
        if not isinstance(m, (ContinuousModel, DiscreteModel)):
            raise OracleError(f"{op} got a non-model input")


def _mc_batches(models, samples, seed):
    """Yield (sums, maxes) arrays batch by batch from spawned child streams."""
    n_batches = (samples + _BATCH - 1) // _BATCH
    children = np.random.SeedSequence(seed).spawn(n_batches)
    done = 0
    for child in children:
        rng = np.random.Generator(np.random.Philox(child))
        size = min(_BATCH, samples - done)
        done += size
        draws = np.empty((len(models), size))
        for i, m in enumerate(models):
            draws[i] = sample(m, rng, size)
        yield draws.sum(axis=0), draws.max(axis=0)


def mc_joint_cdf(models, n: int, points, samples: int, seed: int = 42) -> OracleReport:
    """Monte Carlo estimate of the joint CDF at the given (y, z) points.

    Counts are accumulated as integers per batch, so the report is
    reproducible bit for bit given the seed. Standard errors are binomial
    with a floor of 1/samples so zero counts still carry slack.
    """
    models = list(models)
    _check_models(models, "mc_joint_cdf")
    if n != len(models):
        raise OracleError(f"n={n} does not match the {len(models)} models given")
    samples = int(samples)
    if samples < 10_000:
        raise OracleError("mc_joint_cdf needs at least 1e4 samples")
    pts = [(float(py), float(pz)) for py, pz in points]
    if not pts:
        raise OracleError("mc_joint_cdf needs at least one query point")
    ys = np.array([p[0] for p in pts])
    zs = np.array([p[1] for p in pts])
    counts = np.zeros(len(pts), dtype=np.int64)
    for s, m in _mc_batches(models, samples, seed):
        counts += ((s[None, :] <= ys[:, None]) & (m[None, :] <= zs[:, None])).sum(axis=1)
    est = counts / samples
    stderr = np.maximum(np.sqrt(est * (1.0 - est) / samples), 1.0 / samples)
    records = [PointRecord(coords=pts[i], oracle_value=float(est[i]), stderr=float(stderr[i]))
               for i in range(len(pts))]
    return OracleReport(method="monte_carlo", sample_count=samples, per_point=records)


def mc_papr_prob(models, n: int, alpha: float, beta: float,
                 samples: int, seed: int = 42) -> OracleReport:
    """Monte Carlo estimate of Pr(alpha <= ratio <= beta); zero sums are excluded."""
    models = list(models)
    _check_models(models, "mc_papr_prob")
    if n != len(models):
        raise OracleError(f"n={n} does not match the {len(models)} models given")
    samples = int(samples)
    if samples < 10_000:
        raise OracleError("mc_papr_prob needs at least 1e4 samples")
    hits = 0
    for s, m in _mc_batches(models, samples, seed):
        pos = s > 0
        ratio = np.empty_like(s)
        ratio[pos] = n * m[pos] / s[pos]
        hit = pos & (ratio >= alpha) & (ratio <= beta)
        hits += int(hit.sum())
    est = hits / samples
    stderr = max(math.sqrt(est * (1.0 - est) / samples), 1.0 / samples)
    rec = PointRecord(coords=(float(alpha), float(beta)),
                      oracle_value=float(est), stderr=float(stderr))
    return OracleReport(method="monte_carlo", sample_count=samples, per_point=[rec])


def enumerate_discrete_joint(models, n: int, l_max: int | None = None) -> PmfTriangle:
    """Exhaustive joint mass table by walking every outcome of the lattice.

    Flat outcome indices are processed in chunks, so memory stays bounded
    while the state count may reach the 1e7 cap. Entirely independent of the
    recurrence fold: each state contributes its product probability directly.
    """
    models = list(models)
    _check_models(models, "enumerate_discrete_joint")
    if n != len(models):
        raise OracleError(f"n={n} does not match the {len(models)} models given")
    for k, m in enumerate(models):
        if not isinstance(m, DiscreteModel):
            raise OracleError(f"enumeration needs discrete models; variable {k + 1} is not")
        if m.shift != 0:
            raise OracleError("enumeration works on unshifted laws")
    vecs = [m.pmf_vector() for m in models]
    shape = tuple(len(v) for v in vecs)
    states = 1
    for d in shape:
        states *= d
    if states > 10_000_000:
        raise OracleError(f"state space {states} exceeds the 1e7 enumeration cap")
    full_l = sum(d - 1 for d in shape)
    if l_max is None:
        l_max = full_l
    l_max = int(l_max)
    m_max = min(max(d - 1 for d in shape), l_max)
    masses = np.zeros((l_max + 1, m_max + 1))
    chunk = 1 << 20
    for lo in range(0, states, chunk):
        idx = np.arange(lo, min(lo + chunk, states))
        ks = np.unravel_index(idx, shape)
        s = np.zeros(len(idx), dtype=np.int64)
        mx = np.zeros(len(idx), dtype=np.int64)
        p = np.ones(len(idx))
        for k_arr, vec in zip(ks, vecs):
            s += k_arr
            np.maximum(mx, k_arr, out=mx)
            p *= vec[k_arr]
        keep = (s <= l_max) & (mx <= m_max)
        np.add.at(masses, (s[keep], mx[keep]), p[keep])
    return PmfTriangle(n, masses, model_fingerprint(models))


def quadrature_joint_cdf(models, points, quad_points: int = 801) -> OracleReport:
    """Joint CDF at given points by direct tensor quadrature or enumeration.

    Continuous model sets go through cdf_direct_smalln, discrete ones through
    cdf_direct_smalln_discrete; both are independent of the recurrences.
    """
    models = list(models)
    _check_models(models, "quadrature_joint_cdf")
    discrete = all(isinstance(m, DiscreteModel) for m in models)
    pts = [(float(py), float(pz)) for py, pz in points]
    records = []
    for (py, pz) in pts:
        if discrete:
            v = cdf_direct_smalln_discrete(models, py, pz)
        else:
            v = cdf_direct_smalln(models, py, pz, quad_points)
        records.append(PointRecord(coords=(py, pz), oracle_value=float(v)))
    return OracleReport(method="nested_quadrature", per_point=records)


def compare(engine_output, oracle_output, tolerance_policy: TolerancePolicy) -> OracleReport:
    """Check an engine output against an oracle result.

    Two shapes are understood: a joint mass table against an enumeration
    table (entrywise absolute comparison, total-variation distance reported,
    violating entries listed up to 100), and a sequence of floats against a
    pointwise oracle report (absolute plus sigma * stderr slack per point).
    """
    pol = tolerance_policy
    if isinstance(engine_output, PmfTriangle) and isinstance(oracle_output, PmfTriangle):
        le = max(engine_output.l_max, oracle_output.l_max)
        me = max(engine_output.m_max, oracle_output.m_max)
        a = np.zeros((le + 1, me + 1))
        b = np.zeros((le + 1, me + 1))
        a[: engine_output.l_max + 1, : engine_output.m_max + 1] = engine_output.masses
        b[: oracle_output.l_max + 1, : oracle_output.m_max + 1] = oracle_output.masses
        diff = a - b
        max_abs = float(np.abs(diff).max()) if diff.size else 0.0
        tv = 0.5 * float(np.abs(diff).sum())
        bad = np.argwhere(np.abs(diff) > pol.absolute)
        records = []
        for l, m in bad[:100]:
            records.append(PointRecord(coords=(int(l), int(m)),
                                       oracle_value=float(b[l, m]),
                                       engine_value=float(a[l, m]),
                                       diff=float(diff[l, m]), ok=False))
        return OracleReport(method="enumeration", max_abs_diff=max_abs,
                            tv_distance=tv, state_count=int(b.size),
                            per_point=records, violations=int(len(bad)),
                            passed=len(bad) == 0)
    if isinstance(oracle_output, OracleReport):
        vals = np.asarray(engine_output, dtype=np.float64).ravel()
        if vals.size != len(oracle_output.per_point):
            raise OracleError(f"engine gave {vals.size} values for"
                              f" {len(oracle_output.per_point)} oracle points")
        records = []
        violations = 0
        max_abs = 0.0
        for v, rec in zip(vals, oracle_output.per_point):
            d = float(v - rec.oracle_value)
            slack = pol.absolute + (pol.sigma * rec.stderr if rec.stderr is not None else 0.0)
            ok = abs(d) <= slack
            if not ok:
                violations += 1
            max_abs = max(max_abs, abs(d))
            records.append(PointRecord(coords=rec.coords, oracle_value=rec.oracle_value,
                                       engine_value=float(v), stderr=rec.stderr,
                                       diff=d, ok=ok))
        return OracleReport(method=oracle_output.method, max_abs_diff=max_abs,
                            sample_count=oracle_output.sample_count,
                            state_count=oracle_output.state_count,
                            per_point=records, violations=violations,
                            passed=violations == 0)
    raise OracleError("compare needs two mass tables or values plus an oracle report")
