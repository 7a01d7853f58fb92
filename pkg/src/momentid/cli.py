"""Config-driven experiment runner.

Each experiment wires a synthetic design to the property checks the library
makes about it and writes a machine-readable report.  Configs are JSON with
a mandatory seed; reports echo the config, embed its hash, and are byte
identical across runs up to the wall-time field.  The process exits zero
exactly when every check passes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import identcore
from .fnspace import GridFunction, GridMeasure, cosine_basis, norm
from .genericity import GeneratorConfig, draw_operator, mc_injectivity
from .identcore import (
    cone_inclusion_suite,
    counterexample,
    gateaux_check,
    sample_ellipsoid_deviations,
)
from .linop import LinearOperator, apply, from_kernel, svd
from .models.ccapm import (
    check_global_identification,
    completeness_check,
    fixed_state_completeness_operator,
    lognormal_ccapm_model,
    perron_frobenius,
)
from .models.quantile import gaussian_quantile_model, quantile_moment_map
from .models.single_index import diagnose_single_index, gaussian_index_design
from .semiparam import SplitDerivative, partial_out, split_lower_bound_check


class UsageError(ValueError):
    pass


def _plain(value):
    """Recursively convert numpy scalars and arrays to plain Python."""
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    detail: str = ""

    def to_json(self) -> dict:
        out = {"name": self.name, "passed": bool(self.passed)}
        if self.value is not None:
            out["value"] = _plain(self.value)
        if self.detail:
            out["detail"] = self.detail
        return out


def _run_counterexample(params: dict, seed: int) -> list[Check]:
    k_min, k_max = params["k_min"], params["k_max"]
    n_terms = params["n_terms"]
    checks = []
    worst_residual = 0.0
    worst_dev = 0.0
    any_in_set = False
    L = None
    for k in range(k_min, k_max + 1):
        case = counterexample(k, n_terms=n_terms)
        worst_residual = max(worst_residual, case.m_norm)
        worst_dev = max(worst_dev, abs(case.dev_norm - 2.0 ** (-k / 4.0)))
        any_in_set = any_in_set or case.in_n
        L = case.L
    checks.append(Check("zero residual along the sequence",
                        worst_residual <= 1e-12, worst_residual))
    checks.append(Check("deviation norm equals tail mass to the 1/4",
                        worst_dev <= 1e-12, worst_dev))
    checks.append(Check("sequence stays outside the identification set",
                        not any_in_set))
    checks.append(Check("curvature constant at least one", L >= 1.0, L))
    return checks


def _run_quantile(params: dict, seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    model = gaussian_quantile_model(
        n_x=params["n_x"], n_w=params["n_w"], n_y=params["n_y"],
        rho=params["rho"], tau=params["tau"],
    )
    mmap, bound = quantile_moment_map(model)
    checks = [Check("model restriction holds at the quantile curve",
                    norm(mmap.eval(mmap.base_point)) <= 1e-10)]
    dec = svd(mmap.derivative)
    fails = 0
    min_m = np.inf
    for delta, coeffs in sample_ellipsoid_deviations(
        dec, bound, params["n_ellipsoid"], rng
    ):
        alpha = mmap.base_point + delta
        m_val = mmap.eval(alpha)
        lin = apply(mmap.derivative, delta)
        ok = norm(m_val - lin) < norm(lin) and norm(m_val) > 1e-10
        fails += 0 if ok else 1
        min_m = min(min_m, norm(m_val))
    checks.append(Check("ellipsoid deviations keep the map away from zero",
                        fails == 0, {"fails": fails, "min_norm": min_m}))
    devs = [
        GridFunction(rng.standard_normal(model.x_measure.size) * s,
                     model.x_measure)
        for s in rng.uniform(0.05, 0.6, size=params["n_deviations"])
    ]
    l_hat = identcore.estimate_nonlinearity(mmap, 2.0, devs)
    checks.append(Check("sampled curvature within the density bounds",
                        l_hat <= 1.05 * bound.L,
                        {"l_hat": l_hat, "bound": bound.L}))
    dirs = [GridFunction(rng.standard_normal(model.x_measure.size) * 0.3,
                         model.x_measure) for _ in range(10)]
    err = gateaux_check(mmap, dirs, [1e-3, 1e-4], richardson=True)
    checks.append(Check("finite differences match the derivative",
                        err < 1e-5, err))
    return checks


def _run_single_index(params: dict, seed: int) -> list[Check]:
    rhos = np.linspace(0.4, 0.7, params["n_designs"])
    checks = []
    all_consistent = True
    scalar_worst = 0.0
    twodim_worst = np.inf
    for i, rho in enumerate(rhos):
        link = "softplus" if i % 2 == 0 else "sin"
        d1 = diagnose_single_index(
            gaussian_index_design(rho=float(rho), w_dim=1, link=link)
        )
        d2 = diagnose_single_index(
            gaussian_index_design(rho=float(rho), w_dim=2, link=link,
                                  n_v=49, n_w=15)
        )
        all_consistent = all_consistent and d1.consistent and d2.consistent
        scalar_worst = max(
            scalar_worst, d1.lambda_min / max(d1.trace, 1e-300)
        )
        twodim_worst = min(twodim_worst, d2.lambda_min / d2.trace)
    checks.append(Check("completeness and Gram singularity never conflict",
                        all_consistent))
    checks.append(Check("scalar instrument absorbs the parametric columns",
                        scalar_worst < 1e-8, scalar_worst))
    checks.append(Check("richer instrument keeps the Gram matrix nonsingular",
                        twodim_worst > 1e-4, twodim_worst))
    return checks


def _run_ccapm(params: dict, seed: int) -> list[Check]:
    model = lognormal_ccapm_model(
        n_state=params["n_state"], n_signal=params["n_signal"]
    )
    checks = []
    pair = perron_frobenius(model, tol=params["pf_tol"])
    checks.append(Check("power iteration reaches the residual tolerance",
                        pair.residual <= 1e-10, pair.residual))
    checks.append(Check("eigenfunction strictly positive",
                        bool((pair.g.values > 0).all())))
    checks.append(Check("leading eigenvalue simple", pair.gap < 1.0, pair.gap))
    checks.append(Check("discount factor recovered",
                        abs(pair.delta - model.delta0) <= 1e-8,
                        pair.delta))
    rep = completeness_check(
        fixed_state_completeness_operator(model, model.c_measure.size // 2),
        tol=1e-8,
    )
    checks.append(Check("conditional expectation injective at the midpoint "
                        "state", rep.injective, rep.sigma_min))
    from .models.ccapm import ccapm_moment_map

    _, split = ccapm_moment_map(model)
    report = partial_out(split, 1e-12)
    trace = float(np.trace(report.gram))
    checks.append(Check("partialled Gram matrix nonsingular",
                        report.lambda_min > 1e-6 * trace,
                        report.lambda_min / trace))
    cands = [
        (model.delta0, model.gamma0, model.g0 * 2.0),
        (model.delta0, model.gamma0 + 0.5, model.g0),
    ]
    gid = check_global_identification(model, cands, tol=1e-8)
    accepted = gid.rows[0].get("is_solution") and gid.rows[0].get("scale_ok")
    rejected = not gid.rows[1].get("is_solution")
    checks.append(Check("scaled truth accepted as the same solution",
                        bool(accepted)))
    checks.append(Check("shifted curvature rejected as a non-solution",
                        bool(rejected)))
    checks.append(Check("no global identification violations",
                        gid.violations == 0))
    return checks


def _run_genericity(params: dict, seed: int) -> tuple[list[Check], np.ndarray]:
    n = params["trunc_n"]
    grid = GridMeasure.uniform(params["grid_n"])
    basis = cosine_basis(grid, n)
    sigma = 1.0 / np.arange(1, n + 1, dtype=float) ** 2
    config = GeneratorConfig(sigma=sigma, kappa=1.0, trunc_n=n, compact=True)
    report = mc_injectivity(config, (basis, basis), params["draws"],
                            params["tol"], seed)
    checks = [
        Check("no draw loses injectivity",
              report.fraction_below_tol == 0.0, report.fraction_below_tol),
        Check("spectrum equals the drawn coefficients",
              report.max_spectrum_deviation <= 1e-10,
              report.max_spectrum_deviation),
    ]
    pos = draw_operator(
        GeneratorConfig(sigma=sigma, kappa=1.0, trunc_n=n, positive=True),
        (basis, basis), seed,
    )
    checks.append(Check("positivity construction keeps the kernel nonnegative",
                        float(pos.operator.entries.min()) >= 0.0,
                        float(pos.operator.entries.min())))
    dens = draw_operator(
        GeneratorConfig(sigma=sigma, kappa=1.0, trunc_n=n, positive=True,
                        density=True),
        (basis, basis), seed,
    )
    rows = dens.operator.entries @ grid.weights
    checks.append(Check("density construction has unit row sums",
                        float(np.abs(rows - 1.0).max()) <= 1e-12,
                        float(np.abs(rows - 1.0).max())))
    return checks, report.sigma_min


def _run_cone_suite(params: dict, seed: int) -> list[Check]:
    report = cone_inclusion_suite(params["instances"], params["dim"], seed)
    return [Check("all cone-set inclusions hold",
                  report.total_violations == 0, report.violations)]


def _run_semiparam_pi(params: dict, seed: int) -> list[Check]:
    mu = GridMeasure([0.0, 1.0], [0.5, 0.5])
    m_g = from_kernel(np.ones((2, 2)), mu, mu)
    split = SplitDerivative(
        m_beta=(GridFunction([1.0, 0.0], mu),), m_g=m_g
    )
    hand = partial_out(split, 1e-12)
    checks = [
        Check("hand example Gram entry",
              abs(hand.gram[0, 0] - 0.25) <= 1e-9, hand.gram[0, 0]),
        Check("hand example eps1",
              abs(hand.eps1 - np.sqrt(0.125)) <= 1e-9, hand.eps1),
    ]
    rng = np.random.default_rng(seed)
    worst_gap = np.inf
    for _ in range(params["n_splits"]):
        n = int(rng.integers(4, 17))
        p = int(rng.integers(1, 4))
        grid = GridMeasure(np.arange(n, dtype=float),
                           rng.uniform(0.2, 1.0, size=n))
        dom = GridMeasure(np.arange(n, dtype=float),
                          rng.uniform(0.2, 1.0, size=n))
        op = LinearOperator(rng.standard_normal((n, n)), dom, grid)
        cols = tuple(GridFunction(rng.standard_normal(n), grid)
                     for _ in range(p))
        split_i = SplitDerivative(m_beta=cols, m_g=op)
        rep = partial_out(split_i, 1e-12)
        ratio = split_lower_bound_check(split_i, rep, params["trials"],
                                        int(rng.integers(2**31)))
        worst_gap = min(worst_gap, ratio - rep.eps)
    checks.append(Check("lower bound holds on random splits",
                        worst_gap >= -1e-10, worst_gap))
    return checks


EXPERIMENTS = {
    "counterexample": {
        "description": "open-ball identification failure of the smooth "
                       "sequence model and its curvature certificate",
        "checks": ["zero residual along the sequence",
                   "deviation norm equals tail mass to the 1/4",
                   "sequence stays outside the identification set",
                   "curvature constant at least one"],
        "defaults": {"k_min": 2, "k_max": 12, "n_terms": 64},
        "runner": _run_counterexample,
    },
    "quantile": {
        "description": "endogenous quantile map: curvature bound, source "
                       "ellipsoid soundness, derivative fidelity",
        "checks": ["model restriction holds at the quantile curve",
                   "ellipsoid deviations keep the map away from zero",
                   "sampled curvature within the density bounds",
                   "finite differences match the derivative"],
        "defaults": {"n_x": 61, "n_w": 61, "n_y": 121, "rho": 0.6,
                     "tau": 0.5, "n_ellipsoid": 100, "n_deviations": 200},
        "runner": _run_quantile,
    },
    "single-index": {
        "description": "index designs: instrument completeness versus "
                       "partialled Gram singularity",
        "checks": ["completeness and Gram singularity never conflict",
                   "scalar instrument absorbs the parametric columns",
                   "richer instrument keeps the Gram matrix nonsingular"],
        "defaults": {"n_designs": 10},
        "runner": _run_single_index,
    },
    "ccapm": {
        "description": "asset pricing design: positive eigenpair, "
                       "completeness, Gram nonsingularity, global scale "
                       "identification",
        "checks": ["power iteration reaches the residual tolerance",
                   "eigenfunction strictly positive",
                   "leading eigenvalue simple",
                   "discount factor recovered",
                   "conditional expectation injective at the midpoint state",
                   "partialled Gram matrix nonsingular",
                   "scaled truth accepted as the same solution",
                   "shifted curvature rejected as a non-solution",
                   "no global identification violations"],
        "defaults": {"n_state": 21, "n_signal": 31, "pf_tol": 1e-12},
        "runner": _run_ccapm,
    },
    "genericity": {
        "description": "random operator draws: injectivity, spectrum, "
                       "positivity and density variants",
        "checks": ["no draw loses injectivity",
                   "spectrum equals the drawn coefficients",
                   "positivity construction keeps the kernel nonnegative",
                   "density construction has unit row sums"],
        "defaults": {"trunc_n": 30, "draws": 200, "tol": 1e-12, "grid_n": 48},
        "runner": _run_genericity,
    },
    "cone-suite": {
        "description": "tangential cone sets: inclusions, equalities and "
                       "transfer bounds on random instances",
        "checks": ["all cone-set inclusions hold"],
        "defaults": {"instances": 10000, "dim": 6},
        "runner": _run_cone_suite,
    },
    "semiparam-pi": {
        "description": "partialled-out Gram matrix: hand example and the "
                       "sampled lower bound on random splits",
        "checks": ["hand example Gram entry", "hand example eps1",
                   "lower bound holds on random splits"],
        "defaults": {"n_splits": 20, "trials": 2000},
        "runner": _run_semiparam_pi,
    },
}


def _np_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    allowed_top = {"experiment", "seed", "out_dir", "params"}
    unknown = set(raw) - allowed_top
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in raw:
        raise UsageError("config must name an experiment")
    if raw["experiment"] not in EXPERIMENTS:
        raise UsageError(
            f"unknown experiment {raw['experiment']!r}; "
            f"choose from {sorted(EXPERIMENTS)}"
        )
    if "seed" not in raw:
        raise UsageError("config must carry an integer seed; wall-clock "
                         "seeding is not supported")
    if not isinstance(raw["seed"], int):
        raise UsageError("seed must be an integer")
    spec = EXPERIMENTS[raw["experiment"]]
    params = dict(spec["defaults"])
    extra = raw.get("params", {})
    unknown = set(extra) - set(params)
    if unknown:
        raise UsageError(
            f"unknown params for {raw['experiment']}: {sorted(unknown)}"
        )
    params.update(extra)
    for key, value in params.items():
        if isinstance(value, (int, float)) and key.startswith(
            ("tol", "pf_tol")
        ) and value <= 0:
            raise UsageError(f"tolerance {key} must be positive")
    return {"experiment": raw["experiment"], "seed": raw["seed"],
            "out_dir": raw.get("out_dir"), "params": params}


def config_hash(config: dict) -> str:
    canon = json.dumps(
        {k: config[k] for k in ("experiment", "seed", "params")},
        sort_keys=True,
    )
    return hashlib.sha256(canon.encode()).hexdigest()


def run_experiment(config: dict) -> tuple[dict, np.ndarray | None]:
    spec = EXPERIMENTS[config["experiment"]]
    start = time.perf_counter()
    samples = None
    try:
        result = spec["runner"](config["params"], config["seed"])
        if isinstance(result, tuple):
            checks, samples = result
        else:
            checks = result
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        checks = [Check("experiment completed", False, detail=str(exc))]
    n_pass = int(sum(bool(c.passed) for c in checks))
    report = {
        "experiment": config["experiment"],
        "config": {k: config[k] for k in ("experiment", "seed", "params")},
        "config_sha256": config_hash(config),
        "checks": [c.to_json() for c in checks],
        "summary": {
            "pass": n_pass == len(checks),
            "n_pass": n_pass,
            "n_fail": len(checks) - n_pass,
        },
        "wall_time_s": time.perf_counter() - start,
    }
    return report, samples


def _write_report(report: dict, samples, out_dir: str, fmt: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report['experiment']}.json"
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_np_default)
        fh.write("\n")
    if fmt == "csv":
        import csv as _csv

        with open(out / f"{report['experiment']}.checks.csv", "w",
                  newline="") as fh:
            wr = _csv.writer(fh)
            wr.writerow(["name", "passed", "value"])
            for c in report["checks"]:
                wr.writerow([c["name"], c["passed"], c.get("value", "")])
        if samples is not None:
            np.savetxt(out / f"{report['experiment']}.sigma_min.csv",
                       samples, delimiter=",", header="sigma_min",
                       comments="")
    return path


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="momentid",
        description="identification diagnostics for conditional moment "
                    "models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("config")
    run_p.add_argument("--out", default=None, help="report directory")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    run_p.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_parser("list", help="list the available experiments")

    args = parser.parse_args(argv)
    if args.command == "list":
        for name in EXPERIMENTS:
            spec = EXPERIMENTS[name]
            print(f"{name}: {spec['description']}")
            for check in spec["checks"]:
                print(f"    - {check}")
        return 0

    try:
        config = load_config(args.config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config["seed"] = args.seed
    out_dir = args.out or config.get("out_dir") or "."
    report, samples = run_experiment(config)
    path = _write_report(report, samples, out_dir, args.format)
    status = "PASS" if report["summary"]["pass"] else "FAIL"
    for check in report["checks"]:
        mark = "ok" if check["passed"] else "FAIL"
        print(f"[{mark}] {check['name']}")
    print(f"{status}: {report['summary']['n_pass']}/{len(report['checks'])} "
          f"checks passed; report at {path}")
    return 0 if report["summary"]["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
