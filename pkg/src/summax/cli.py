"""Command line front end: JSON-configured runs of the engines and oracles.

A run is described by one JSON document (see README for the schema): the
variables, a task, an optional grid block, task-specific query fields, and
output settings. Results go to stdout as a JSON envelope or to a file; CSV
output writes the main artifact (grid, table or point list) in long format.

Exit codes: 0 success, 1 a validation task found violations, 2 configuration
error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv as _csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import models as mdl
from .cont_engine import (
    cdf_mixed_at,
    cdf_recursive,
    cdf_shifted,
    pdf_iid_recursive,
    pdf_recursive,
)
from .derived import (
    PaprQuery,
    conditional,
    joint_moment,
    marginal_max,
    marginal_sum,
    papr_prob_continuous,
    papr_prob_discrete,
    prob_zero_sum,
)
from .disc_engine import (
    cdf_shifted_discrete,
    pmf_from_cdf_differencing,
    pmf_iid_with_h,
    pmf_recursive,
)
from .errors import ConfigError, SumMaxError
from .grids import GridSpec, default_grid_spec
from .models import (
    ContinuousFamily,
    ContinuousModel,
    DiscreteModel,
    canonical_text,
    make_rng,
    model_fingerprint,
    sample,
)
from .oracle import (
    TolerancePolicy,
    compare,
    enumerate_discrete_joint,
    mc_joint_cdf,
    quadrature_joint_cdf,
)

__all__ = ["RunConfig", "parse_config", "serialize_config", "run", "main"]

_TASKS = ("cdf", "pdf", "pmf", "papr", "marginal", "conditional",
          "moments", "validate", "sample")

_ENVELOPE_SPEC = "summax-run-1"


@dataclass
class RunConfig:
    task: str
    models: list
    grid: GridSpec | None = None
    points: list[tuple[float, float]] | None = None
    alpha: float | None = None
    beta: float | None = None
    axis: str | None = None
    value: float | None = None
    exponents: list[tuple[float, float]] | None = None
    count: int | None = None
    samples: int | None = None
    l_max: int | None = None
    output_path: str | None = None
    output_format: str = "json"
    seed: int = 42
    epsilon: float = 1e-6
    quiet: bool = False
    grid_nodes: tuple[int, int] = (512, 512)

    def to_dict(self) -> dict:
        """The canonical config document this run corresponds to."""
        doc: dict = {
            "task": self.task,
            "variables": [_model_to_config(m) for m in self.models],
            "seed": self.seed,
            "epsilon": self.epsilon,
        }
        if self.grid is not None:
            doc["grid"] = {"y_max": self.grid.y_max, "z_max": self.grid.z_max,
                           "n_y": self.grid.n_y, "n_z": self.grid.n_z}
        elif self.grid_nodes != (512, 512):
            doc["grid"] = {"n_y": self.grid_nodes[0], "n_z": self.grid_nodes[1]}
        query: dict = {}
        if self.points is not None:
            query["points"] = [[y, z] for y, z in self.points]
        for name in ("alpha", "beta", "axis", "value", "count", "samples", "l_max"):
            v = getattr(self, name)
            if v is not None:
                query[name] = v
        if self.exponents is not None:
            query["exponents"] = [[a, b] for a, b in self.exponents]
        if query:
            doc["query"] = query
        out: dict = {}
        if self.output_path is not None:
            out["path"] = self.output_path
        if self.output_format != "json":
            out["format"] = self.output_format
        if out:
            doc["output"] = out
        return doc


_CONT_PARAMS = {
    "exponential": ("rate",),
    "uniform": ("lower", "upper"),
    "gamma": ("shape", "rate"),
    "weibull": ("shape", "scale"),
    "tabulated": ("abscissae", "densities"),
}

_DISC_PARAMS = {
    "poisson": ("mean",),
    "geometric": ("p",),
    "binomial": ("trials", "p"),
    "uniform_int": ("lower", "upper"),
    "explicit": ("probabilities",),
    "bernoulli": ("p",),
}


def _model_to_config(model) -> dict:
    if isinstance(model, ContinuousModel):
        fam = model.family.value
        doc: dict = {"kind": "continuous", "family": fam}
        if fam == "tabulated":
            doc["params"] = {"abscissae": model.table_x.tolist(),
                             "densities": model.table_d.tolist()}
        else:
            names = _CONT_PARAMS[fam]
            doc["params"] = {name: model.params[i] for i, name in enumerate(names)}
        if model.shift != 0.0:
            doc["shift"] = model.shift
        return doc
    fam = model.family.value
    doc = {"kind": "discrete", "family": fam}
    if fam == "explicit":
        doc["params"] = {"probabilities": list(model.probs)}
    else:
        names = _DISC_PARAMS[fam]
        doc["params"] = {name: model.params[i] for i, name in enumerate(names)}
    if model.shift != 0:
        doc["shift"] = model.shift
    if model.family in (mdl.DiscreteFamily.POISSON, mdl.DiscreteFamily.GEOMETRIC) \
            and model.truncation_epsilon != 1e-10:
        doc["truncation_epsilon"] = model.truncation_epsilon
    return doc


def _want(obj: dict, key: str, types, where: str, required: bool = True, default=None):
    if key not in obj:
        if required:
            raise ConfigError(where, f"missing required key {key!r}")
        return default
    v = obj[key]
    if types is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}.{key}", "expected a number")
        return float(v)
    if types is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where}.{key}", "expected an integer")
        return v
    if not isinstance(v, types):
        raise ConfigError(f"{where}.{key}", f"expected {types.__name__}")
    return v


def _no_extras(obj: dict, allowed, where: str) -> None:
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}", "unknown key")


def _parse_variable(doc, idx: int):
    where = f"variables[{idx}]"
    if not isinstance(doc, dict):
        raise ConfigError(where, "each variable must be an object")
    _no_extras(doc, ("kind", "family", "params", "shift", "truncation_epsilon"), where)
    kind = _want(doc, "kind", str, where)
    famname = _want(doc, "family", str, where)
    params = _want(doc, "params", dict, where)
    try:
        if kind == "continuous":
            if famname not in _CONT_PARAMS:
                raise ConfigError(f"{where}.family",
                                  f"unknown continuous family {famname!r}")
            shift = _want(doc, "shift", float, where, required=False, default=0.0)
            names = _CONT_PARAMS[famname]
            _no_extras(params, names, f"{where}.params")
            if famname == "tabulated":
                xs = _want(params, "abscissae", list, f"{where}.params")
                ds = _want(params, "densities", list, f"{where}.params")
                return mdl.tabulated(xs, ds, shift=shift)
            args = [_want(params, nm, float, f"{where}.params") for nm in names]
            factory = {"exponential": mdl.exponential, "uniform": mdl.uniform,
                       "gamma": mdl.gamma, "weibull": mdl.weibull}[famname]
            return factory(*args, shift=shift)
        if kind == "discrete":
            if famname not in _DISC_PARAMS:
                raise ConfigError(f"{where}.family",
                                  f"unknown discrete family {famname!r}")
            shift = _want(doc, "shift", int, where, required=False, default=0)
            eps = _want(doc, "truncation_epsilon", float, where,
                        required=False, default=1e-10)
            names = _DISC_PARAMS[famname]
            _no_extras(params, names, f"{where}.params")
            if famname == "explicit":
                probs = _want(params, "probabilities", list, f"{where}.params")
                return mdl.explicit(probs, shift=shift)
            if famname == "poisson":
                return mdl.poisson(_want(params, "mean", float, f"{where}.params"),
                                   shift=shift, truncation_epsilon=eps)
            if famname == "geometric":
                return mdl.geometric(_want(params, "p", float, f"{where}.params"),
                                     shift=shift, truncation_epsilon=eps)
            if famname == "binomial":
                return mdl.binomial(_want(params, "trials", int, f"{where}.params"),
                                    _want(params, "p", float, f"{where}.params"),
                                    shift=shift)
            if famname == "uniform_int":
                return mdl.uniform_int(_want(params, "lower", int, f"{where}.params"),
                                       _want(params, "upper", int, f"{where}.params"),
                                       shift=shift)
            return mdl.bernoulli(_want(params, "p", float, f"{where}.params"),
                                 shift=shift)
        raise ConfigError(f"{where}.kind", f"unknown kind {kind!r}")
    except SumMaxError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(where, str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document into a RunConfig."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("document", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("document", "the config must be a JSON object")
    _no_extras(doc, ("task", "variables", "grid", "query", "output", "seed", "epsilon"),
               "document")
    task = _want(doc, "task", str, "document")
    if task not in _TASKS:
        raise ConfigError("task", f"unknown task {task!r}; choose from {', '.join(_TASKS)}")
    variables = _want(doc, "variables", list, "document")
    if not variables:
        raise ConfigError("variables", "at least one variable is required")
    built = [_parse_variable(v, i) for i, v in enumerate(variables)]

    kinds = {type(m) for m in built}
    if len(kinds) > 1 and task != "cdf":
        raise ConfigError("variables",
                          f"mixed continuous/discrete variables are only supported"
                          f" for task \"cdf\", not {task!r}")
    all_cont = all(isinstance(m, ContinuousModel) for m in built)
    all_disc = all(isinstance(m, DiscreteModel) for m in built)
    if task in ("pdf", "pmf", "papr", "marginal", "conditional", "moments", "validate"):
        for i, m in enumerate(built):
            if m.shift != 0:
                raise ConfigError(f"variables[{i}].shift",
                                  f"task {task!r} supports unshifted variables only")
    if task in ("pdf",) and not all_cont:
        raise ConfigError("variables", "task \"pdf\" needs continuous variables;"
                                       " use \"pmf\" for discrete ones")
    if task == "pmf" and not all_disc:
        raise ConfigError("variables", "task \"pmf\" needs discrete variables;"
                                       " use \"pdf\" for continuous ones")
    if task == "pdf" and len(built) < 2:
        raise ConfigError("variables", "task \"pdf\" needs at least two variables;"
                                       " the one-variable joint density is degenerate")
    if task in ("marginal", "conditional", "moments") and all_cont and len(built) < 2:
        raise ConfigError("variables", f"task {task!r} needs at least two continuous"
                                       " variables (the joint density is degenerate)")

    seed = _want(doc, "seed", int, "document", required=False, default=42)
    epsilon = _want(doc, "epsilon", float, "document", required=False, default=1e-6)
    if not 0.0 < epsilon < 1.0:
        raise ConfigError("epsilon", "epsilon must lie in (0, 1)")

    grid = None
    grid_nodes = (512, 512)
    if "grid" in doc:
        gd = _want(doc, "grid", dict, "document")
        _no_extras(gd, ("y_max", "z_max", "n_y", "n_z"), "grid")
        n_y = _want(gd, "n_y", int, "grid", required=False, default=512)
        n_z = _want(gd, "n_z", int, "grid", required=False, default=512)
        if ("y_max" in gd) != ("z_max" in gd):
            raise ConfigError("grid", "give both y_max and z_max or neither")
        if "y_max" in gd:
            try:
                grid = GridSpec(_want(gd, "y_max", float, "grid"),
                                _want(gd, "z_max", float, "grid"), n_y, n_z)
            except SumMaxError as exc:
                raise ConfigError("grid", str(exc)) from exc
        else:
            grid_nodes = (n_y, n_z)

    qd = _want(doc, "query", dict, "document", required=False, default={})
    _no_extras(qd, ("points", "alpha", "beta", "axis", "value", "exponents",
                    "count", "samples", "l_max"), "query")
    points = None
    if "points" in qd:
        raw = _want(qd, "points", list, "query")
        points = []
        for i, pt in enumerate(raw):
            if (not isinstance(pt, list) or len(pt) != 2
                    or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in pt)):
                raise ConfigError(f"query.points[{i}]", "each point must be [y, z]")
            points.append((float(pt[0]), float(pt[1])))
    exponents = None
    if "exponents" in qd:
        raw = _want(qd, "exponents", list, "query")
        exponents = []
        for i, ab in enumerate(raw):
            if (not isinstance(ab, list) or len(ab) != 2
                    or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in ab)):
                raise ConfigError(f"query.exponents[{i}]", "each entry must be [a, b]")
            exponents.append((float(ab[0]), float(ab[1])))
    cfg = RunConfig(
        task=task, models=built, grid=grid, points=points,
        alpha=_want(qd, "alpha", float, "query", required=False),
        beta=_want(qd, "beta", float, "query", required=False),
        axis=_want(qd, "axis", str, "query", required=False),
        value=_want(qd, "value", float, "query", required=False),
        exponents=exponents,
        count=_want(qd, "count", int, "query", required=False),
        samples=_want(qd, "samples", int, "query", required=False),
        l_max=_want(qd, "l_max", int, "query", required=False),
        seed=seed, epsilon=epsilon, grid_nodes=grid_nodes,
    )
    if "output" in doc:
        od = _want(doc, "output", dict, "document")
        _no_extras(od, ("path", "format"), "output")
        cfg.output_path = _want(od, "path", str, "output", required=False)
        fmt = _want(od, "format", str, "output", required=False, default="json")
        if fmt not in ("json", "csv"):
            raise ConfigError("output.format", f"unknown format {fmt!r}; use json or csv")
        cfg.output_format = fmt

    _check_task_query(cfg)
    return cfg


def _check_task_query(cfg: RunConfig) -> None:
    if cfg.task == "cdf" and not cfg.points:
        raise ConfigError("query.points", "task \"cdf\" needs at least one [y, z] point")
    if cfg.task == "papr":
        if cfg.alpha is None or cfg.beta is None:
            raise ConfigError("query", "task \"papr\" needs alpha and beta")
        try:
            PaprQuery(cfg.alpha, cfg.beta, len(cfg.models))
        except SumMaxError as exc:
            raise ConfigError("query", str(exc)) from exc
    if cfg.task == "marginal" and cfg.axis not in ("sum", "max"):
        raise ConfigError("query.axis", "task \"marginal\" needs axis \"sum\" or \"max\"")
    if cfg.task == "conditional":
        if cfg.axis not in ("sum", "max"):
            raise ConfigError("query.axis", "task \"conditional\" needs axis \"sum\" or \"max\"")
        if cfg.value is None:
            raise ConfigError("query.value", "task \"conditional\" needs a conditioning value")
    if cfg.task == "moments" and not cfg.exponents:
        raise ConfigError("query.exponents", "task \"moments\" needs a list of [a, b] pairs")
    if cfg.task == "sample":
        if cfg.count is None or cfg.count < 1:
            raise ConfigError("query.count", "task \"sample\" needs a positive draw count")
    if cfg.samples is not None and cfg.samples < 10_000:
        raise ConfigError("query.samples", "oracle runs need at least 1e4 samples")


def serialize_config(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)


def _resolve_grid(cfg: RunConfig) -> GridSpec:
    if cfg.grid is not None:
        return cfg.grid
    return default_grid_spec(cfg.models, epsilon=cfg.epsilon,
                             n_y=cfg.grid_nodes[0], n_z=cfg.grid_nodes[1])


def _iid(models) -> bool:
    texts = {canonical_text(m) for m in models}
    return len(texts) == 1


def _pdf_grid_for(cfg: RunConfig):
    spec = _resolve_grid(cfg)
    if len(cfg.models) >= 2 and _iid(cfg.models):
        return pdf_iid_recursive(cfg.models[0], len(cfg.models), spec)
    return pdf_recursive(cfg.models, spec)


def _triangle_for(cfg: RunConfig):
    return pmf_recursive(cfg.models, l_max=cfg.l_max)


def _run_cdf(cfg: RunConfig):
    ms = cfg.models
    all_cont = all(isinstance(m, ContinuousModel) for m in ms)
    all_disc = all(isinstance(m, DiscreteModel) for m in ms)
    rows = []
    if all_disc:
        for (py, pz) in cfg.points:
            rows.append([py, pz, cdf_shifted_discrete(ms, py, pz)])
    elif all_cont:
        spec = _resolve_grid(cfg)
        ys = np.array([p[0] for p in cfg.points])
        zs = np.array([p[1] for p in cfg.points])
        vals = np.atleast_1d(np.asarray(cdf_shifted(ms, spec, ys, zs), dtype=np.float64))
        rows = [[float(py), float(pz), float(v)]
                for (py, pz), v in zip(cfg.points, vals)]
    else:
        spec = _resolve_grid(cfg)
        for (py, pz) in cfg.points:
            rows.append([py, pz, float(cdf_mixed_at(ms, py, pz, spec))])
    return {"points": rows}, [("points", rows)]


def _run_pdf(cfg: RunConfig):
    g = _pdf_grid_for(cfg)
    results = {"grid": g.to_json_dict()}
    artifacts = [("grid", g)]
    if cfg.points:
        ys = np.array([p[0] for p in cfg.points])
        zs = np.array([p[1] for p in cfg.points])
        vals = np.atleast_1d(g.eval(ys, zs))
        rows = [[float(py), float(pz), float(v)]
                for (py, pz), v in zip(cfg.points, vals)]
        results["points"] = rows
    return results, artifacts


def _run_pmf(cfg: RunConfig):
    tri = _triangle_for(cfg)
    return {"triangle": tri.to_json_dict()}, [("triangle", tri)]


def _run_papr(cfg: RunConfig):
    n = len(cfg.models)
    query = PaprQuery(cfg.alpha, cfg.beta, n)
    if all(isinstance(m, DiscreteModel) for m in cfg.models):
        tri = _triangle_for(cfg)
        prob = papr_prob_discrete(tri, query)
        res = {"alpha": cfg.alpha, "beta": cfg.beta, "probability": prob,
               "zero_sum_mass": prob_zero_sum(tri)}
    elif n == 1:
        # a single positive variable has ratio exactly 1
        prob = 1.0 if cfg.alpha <= 1.0 <= cfg.beta else 0.0
        res = {"alpha": cfg.alpha, "beta": cfg.beta, "probability": prob}
    else:
        g = _pdf_grid_for(cfg)
        prob = papr_prob_continuous(g, query)
        res = {"alpha": cfg.alpha, "beta": cfg.beta, "probability": prob}
    rows = [[cfg.alpha, cfg.beta, prob]]
    return res, [("papr", rows)]


def _run_marginal(cfg: RunConfig):
    if all(isinstance(m, DiscreteModel) for m in cfg.models):
        joint = _triangle_for(cfg)
    else:
        joint = _pdf_grid_for(cfg)
    table = marginal_sum(joint) if cfg.axis == "sum" else marginal_max(joint)
    return {"table": table.to_json_dict()}, [("table", table)]


def _run_conditional(cfg: RunConfig):
    if all(isinstance(m, DiscreteModel) for m in cfg.models):
        joint = _triangle_for(cfg)
    else:
        joint = _pdf_grid_for(cfg)
    table = conditional(joint, cfg.axis, cfg.value)
    return {"table": table.to_json_dict()}, [("table", table)]


def _run_moments(cfg: RunConfig):
    if all(isinstance(m, DiscreteModel) for m in cfg.models):
        joint = _triangle_for(cfg)
    else:
        joint = _pdf_grid_for(cfg)
    rows = []
    for a, b in cfg.exponents:
        rows.append([a, b, joint_moment(joint, a, b)])
    return {"moments": rows}, [("moments", rows)]


def _run_sample(cfg: RunConfig):
    rng = make_rng(cfg.seed)
    draws = np.empty((len(cfg.models), cfg.count))
    for i, m in enumerate(cfg.models):
        draws[i] = sample(m, rng, cfg.count)
    ys = draws.sum(axis=0)
    zs = draws.max(axis=0)
    rows = [[float(a), float(b)] for a, b in zip(ys, zs)]
    return {"samples": rows}, [("samples", rows)]


def _run_validate(cfg: RunConfig):
    ms = cfg.models
    n = len(ms)
    checks = []
    if all(isinstance(m, DiscreteModel) for m in ms):
        engine = pmf_recursive(ms)
        oracle = enumerate_discrete_joint(ms, n)
        pol = TolerancePolicy(absolute=1e-12)
        checks.append(("recurrence vs enumeration", compare(engine, oracle, pol)))
        checks.append(("differencing vs enumeration",
                       compare(pmf_from_cdf_differencing(ms), oracle, pol)))
        if _iid(ms):
            checks.append(("symmetric recurrence vs enumeration",
                           compare(pmf_iid_with_h(ms[0], n), oracle, pol)))
    else:
        spec = _resolve_grid(cfg)
        pts = cfg.points or [(fy * spec.y_max, fz * spec.z_max)
                             for fy in (0.2, 0.35, 0.5, 0.65, 0.8)
                             for fz in (0.2, 0.35, 0.5, 0.65, 0.8)]
        nsamp = cfg.samples or 200_000
        all_cont = all(isinstance(m, ContinuousModel) for m in ms)
        if all_cont:
            if n == 1:
                vals = [float(mdl.cdf_eval(ms[0], min(py, pz))) for (py, pz) in pts]
            else:
                g = cdf_recursive(ms, spec)
                ys = np.array([p[0] for p in pts])
                zs = np.array([p[1] for p in pts])
                vals = np.atleast_1d(g.eval(ys, zs, clamp=True)).tolist()
        else:
            vals = [float(cdf_mixed_at(ms, py, pz, spec)) for (py, pz) in pts]
        mc = mc_joint_cdf(ms, n, pts, nsamp, seed=cfg.seed)
        checks.append(("grid CDF vs Monte Carlo",
                       compare(vals, mc, TolerancePolicy(absolute=5e-3, sigma=3.0))))
        if all_cont and 2 <= n <= 4:
            sub = pts[:: max(1, len(pts) // 5)]
            qp = {2: 2001, 3: 301, 4: 61}[n]
            quad = quadrature_joint_cdf(ms, sub, qp)
            ys = np.array([p[0] for p in sub])
            zs = np.array([p[1] for p in sub])
            sub_vals = np.atleast_1d(g.eval(ys, zs, clamp=True)).tolist()
            checks.append(("grid CDF vs direct quadrature",
                           compare(sub_vals, quad, TolerancePolicy(absolute=2e-3))))
    rows = []
    failed = False
    for name, rep in checks:
        rows.append({"check": name, "method": rep.method,
                     "max_abs_diff": rep.max_abs_diff,
                     "violations": rep.violations, "passed": rep.passed,
                     "sample_count": rep.sample_count,
                     "state_count": rep.state_count})
        failed = failed or not rep.passed
    if not cfg.quiet:
        for r in rows:
            flag = "pass" if r["passed"] else "FAIL"
            print(f"[{flag}] {r['check']}: max_abs_diff={r['max_abs_diff']:.3e}"
                  f" violations={r['violations']}")
    table_rows = [[r["check"], r["method"], r["max_abs_diff"],
                   r["violations"], r["passed"]] for r in rows]
    return {"checks": rows, "failed": failed}, [("checks", table_rows)]


_RUNNERS = {
    "cdf": _run_cdf,
    "pdf": _run_pdf,
    "pmf": _run_pmf,
    "papr": _run_papr,
    "marginal": _run_marginal,
    "conditional": _run_conditional,
    "moments": _run_moments,
    "sample": _run_sample,
    "validate": _run_validate,
}

_CSV_HEADERS = {
    "points": ("y", "z", "value"),
    "papr": ("alpha", "beta", "probability"),
    "moments": ("a", "b", "value"),
    "samples": ("y", "z"),
    "checks": ("check", "method", "max_abs_diff", "violations", "passed"),
}


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_csv(kind: str, payload, path: str | None) -> None:
    """Write the main artifact as CSV to path, or to stdout when path is None.

    Grids, triangles and tables know their own long format through to_csv;
    plain row lists get a header from _CSV_HEADERS.
    """
    if hasattr(payload, "to_csv"):
        if path is not None:
            payload.to_csv(path)
            return
        fd, name = tempfile.mkstemp(suffix=".csv")
        os.close(fd)
        try:
            payload.to_csv(name)
            with open(name) as fh:
                sys.stdout.write(fh.read())
        finally:
            os.unlink(name)
        return
    buf = io.StringIO()
    writer = _csv.writer(buf)
    writer.writerow(_CSV_HEADERS[kind])
    for row in payload:
        writer.writerow([_fmt_cell(c) for c in row])
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def run(config: RunConfig) -> int:
    """Execute a parsed config; returns the process exit code."""
    results, artifacts = _RUNNERS[config.task](config)
    envelope = {
        "spec": _ENVELOPE_SPEC,
        "task": config.task,
        "n": len(config.models),
        "model_fingerprint": model_fingerprint(config.models),
        "seed": config.seed,
        "epsilon": config.epsilon,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "results": results,
    }
    if config.output_format == "csv":
        kind, payload = artifacts[0]
        _write_csv(kind, payload, config.output_path)
        if config.output_path and not config.quiet:
            print(f"wrote {config.output_path}")
    else:
        text = json.dumps(envelope, indent=2, sort_keys=True)
        if config.output_path:
            with open(config.output_path, "w") as fh:
                fh.write(text)
                fh.write("\n")
            if not config.quiet:
                print(f"wrote {config.output_path}")
        else:
            print(text)
    if config.task == "validate" and results.get("failed"):
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="summax",
        description="Joint distribution of the sum and max of independent"
                    " nonnegative variables.")
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--output", help="write results to this path")
    parser.add_argument("--format", choices=("json", "csv"), help="output format")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--grid-points", type=int,
                        help="override the node count on both grid axes")
    parser.add_argument("--epsilon", type=float, help="override the tail mass budget")
    parser.add_argument("--quiet", action="store_true", help="suppress progress chatter")
    args = parser.parse_args(argv)
    try:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from exc
        cfg = parse_config(text)
        if args.output is not None:
            cfg.output_path = args.output
        if args.format is not None:
            cfg.output_format = args.format
        if args.seed is not None:
            cfg.seed = args.seed
        if args.epsilon is not None:
            if not 0.0 < args.epsilon < 1.0:
                raise ConfigError("epsilon", "epsilon must lie in (0, 1)")
            cfg.epsilon = args.epsilon
        if args.grid_points is not None:
            if args.grid_points < 16:
                raise ConfigError("grid-points", "grids need at least 16 nodes per axis")
            if cfg.grid is not None:
                cfg.grid = GridSpec(cfg.grid.y_max, cfg.grid.z_max,
                                    args.grid_points, args.grid_points)
            else:
                cfg.grid_nodes = (args.grid_points, args.grid_points)
        if args.quiet:
            cfg.quiet = True
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SumMaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
