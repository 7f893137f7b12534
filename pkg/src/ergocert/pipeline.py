"""Orchestrated runs: reference measure, certificates, solver, report.

The driving idea is two-step: first build a reference measure the
dynamics respect (a start distribution smoothed through the resolvent),
then ask quantitative questions against that reference — absolute
continuity, almost invariance at the cheapest constants, the small-set
occupation index, and finally the constructive solver. Each stage is
independent where possible; failures are collected, not fatal.

four_way_verdicts packages the equivalence at the heart of the package:
on a finite model, almost invariance with leakage below one, its mean
variant, the index staying under the total mass, and the solver finding
a nonzero invariant measure are four views of the same fact and must
agree.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Kernel, Measure, StateFn, StateSet
from .semigroup import Generator, auxiliary_measure
from .solver import solve_cesaro_adjoint, solve_continuous, solve_eigen
from .convergence import decay_report
from .scenarios import Scenario, generate
from .harnack import certify_harnack_pipeline
from .certificates.almost import (check_absolute_continuity,
                                  check_almost_invariant,
                                  check_mean_almost_invariant,
                                  index_profile, optimal_linear_params,
                                  profile_certificate)
from .certificates.phi import AlmostInvarianceParams, PhiLinear
from . import io as eio

__all__ = ["Report", "four_way_verdicts", "run_pipeline", "DEFAULT_STEPS"]

DEFAULT_STEPS = ("auxiliary-measure", "absolute-continuity",
                 "index-profile", "almost-invariance", "invariant")


@dataclass
class Report:
    """Everything one pipeline run produced, JSON-able via to_doc."""

    scenario: Scenario | None = None
    certificates: list = field(default_factory=list)
    invariants_found: list = field(default_factory=list)
    profiles: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_doc(self) -> dict:
        doc = {
            "type": "report",
            "scenario": (None if self.scenario is None
                         else eio.scenario_to_doc(self.scenario)),
            "certificates": [eio.certificate_to_doc(c)
                             for c in self.certificates],
            "invariants_found": eio.jsonable(self.invariants_found),
            "profiles": eio.jsonable(self.profiles),
            "timing": eio.jsonable(self.timing),
            "errors": list(self.errors),
        }
        eio.validate_document(doc)
        return doc

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.certificates)


def four_way_verdicts(P: Kernel, m: Measure, horizon: int = 96) -> dict:
    """The four equivalent existence tests, each as a boolean.

    almost: linear almost invariance at the optimal constants has
    leakage below one. mean: same for running averages. index: the
    small-cap occupation index stays below the total mass. solver: the
    averaged adjoint construction returns a nonzero measure. On a finite
    model these must agree; the dict carries the booleans, the numbers
    behind them, and the agreement flag. A passing leakage whose
    certificate then fails to verify indicates an internal bug and
    raises.
    """
    out = {}
    opt = optimal_linear_params(P, m, horizon=horizon)
    out["delta"] = opt["delta"]
    out["almost"] = bool(opt["delta"] < 1.0 - 1e-9)
    if out["almost"]:
        params = AlmostInvarianceParams(PhiLinear(opt["c"]),
                                        opt["delta"] + 1e-12,
                                        horizon=horizon)
        cert = check_almost_invariant(P, m, params)
        if not cert.holds:
            raise ArithmeticError("optimal constants failed verification")

    mopt = optimal_linear_params(P, m, horizon=horizon, mode="mean")
    out["mean_delta"] = mopt["delta"]
    out["mean"] = bool(mopt["delta"] < 1.0 - 1e-9)
    if out["mean"]:
        params = AlmostInvarianceParams(PhiLinear(mopt["c"]),
                                        mopt["delta"] + 1e-12,
                                        horizon=horizon)
        cert = check_mean_almost_invariant(P, m, params)
        if not cert.holds:
            raise ArithmeticError("optimal mean constants failed verification")

    prof = index_profile(P, m, horizon=horizon)
    out["index_estimate"] = prof.index_estimate
    out["threshold"] = prof.threshold
    out["index"] = bool(prof.verdict == "holds")

    res = solve_cesaro_adjoint(P, m)
    out["invariant_mass"] = res.nu.mass
    out["solver"] = bool(res.nu.mass > 1e-8 * m.mass)

    votes = (out["almost"], out["mean"], out["index"], out["solver"])
    out["agree"] = bool(all(votes) or not any(votes))
    return out


def _normalize_steps(raw):
    steps = []
    for item in raw:
        if isinstance(item, str):
            steps.append((item, {}))
        elif isinstance(item, dict) and "step" in item:
            opts = {k: v for k, v in item.items() if k != "step"}
            steps.append((str(item["step"]), opts))
        else:
            raise ValueError(f"bad step entry {item!r}")
    return steps


def _resolve_inputs(config, base_dir):
    """Returns (scenario|None, system, V, C, m_explicit, mu)."""
    base = Path(base_dir) if base_dir is not None else Path(".")

    def _load(name, expect):
        return eio.load_document(base / config["inputs"][name], expect)

    scenario = None
    V = C = None
    m_explicit = mu = None
    if "scenario" in config:
        sdoc = dict(config["scenario"])
        sdoc.setdefault("type", "scenario")
        scenario = eio.scenario_from_doc(sdoc)
        bundle = generate(scenario)
        system, V, C = bundle.kernel, bundle.V, bundle.C
    elif "inputs" in config:
        inputs = config["inputs"]
        if "kernel" in inputs:
            system = eio.kernel_from_doc(_load("kernel", "kernel"))
        elif "generator" in inputs:
            system = eio.generator_from_doc(_load("generator", "generator"))
        else:
            raise ValueError("inputs need a kernel or a generator file")
        if "lyapunov" in inputs:
            V = eio.statefn_from_doc(_load("lyapunov", "statefn"),
                                     system.space)
        if "m" in inputs:
            m_explicit = eio.measure_from_doc(_load("m", "measure"),
                                              system.space)
        if "mu" in inputs:
            mu = eio.measure_from_doc(_load("mu", "measure"), system.space)
    else:
        raise ValueError("config needs a scenario or inputs")

    if "m" in config and isinstance(config["m"], list):
        m_explicit = Measure(system.space, np.array(config["m"], dtype=float))
    if "mu" in config and isinstance(config["mu"], list):
        mu = Measure(system.space, np.array(config["mu"], dtype=float))
    return scenario, system, V, C, m_explicit, mu


def run_pipeline(config, base_dir=None) -> Report:
    """Execute the configured stages and assemble a Report.

    config is a pipeline-config document (dict) or a path to one.
    Stages: auxiliary-measure, absolute-continuity, index-profile,
    almost-invariance (with the four-way summary on kernels), invariant,
    convergence, harnack. Unknown stages and stage failures land in
    errors; independent stages still run. Emits the report JSON and CSV
    series when out/csv_dir are configured.
    """
    if not isinstance(config, dict):
        path = Path(config)
        config = eio.load_document(path, "pipeline-config")
        if base_dir is None:
            base_dir = path.parent
    else:
        eio.validate_document(config)

    report = Report()
    scenario, system, V, C, m_explicit, mu = _resolve_inputs(
        config, base_dir)
    report.scenario = scenario
    horizon = int(config.get("horizon", 256))
    steps = _normalize_steps(config.get("steps", DEFAULT_STEPS))
    discrete = isinstance(system, Kernel)

    def timed(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        except Exception as exc:
            report.errors.append(f"{name}: {exc}")
            return None
        finally:
            report.timing[name] = time.perf_counter() - t0

    # reference measure, needed by almost every stage
    def build_reference():
        if m_explicit is not None:
            report.profiles["reference"] = "supplied directly"
            return m_explicit
        start = mu
        if start is None:
            n = system.space.size
            start = Measure(system.space, np.full(n, 1.0 / n))
            report.profiles["reference"] = "resolvent of the uniform start"
        else:
            report.profiles["reference"] = "resolvent of the supplied start"
        return auxiliary_measure(system, start)

    m_ref = timed("auxiliary-measure", build_reference)
    if m_ref is None:
        return _emit(report, config, base_dir)

    for name, opts in steps:
        if name == "auxiliary-measure":
            continue

        if name == "absolute-continuity":
            cert = timed(name, lambda: check_absolute_continuity(system,
                                                                 m_ref))
            if cert is not None:
                report.certificates.append(cert)

        elif name == "index-profile":
            prof = timed(name, lambda: index_profile(system, m_ref,
                                                     horizon=horizon))
            if prof is not None:
                report.certificates.append(profile_certificate(prof))
                report.profiles["index"] = {
                    "epsilons": list(prof.epsilons),
                    "crisp": (None if prof.crisp is None
                              else list(prof.crisp)),
                    "fractional": (None if prof.fractional is None
                                   else list(prof.fractional)),
                    "estimate": prof.index_estimate,
                    "threshold": prof.threshold,
                    "verdict": prof.verdict,
                }

        elif name == "almost-invariance":
            def _almost():
                opt = optimal_linear_params(system, m_ref, horizon=horizon)
                params = AlmostInvarianceParams(
                    PhiLinear(opt["c"]), min(opt["delta"] + 1e-12, 1.0),
                    horizon=horizon)
                certs = [check_almost_invariant(system, m_ref, params),
                         check_mean_almost_invariant(system, m_ref, params)]
                four = (four_way_verdicts(system, m_ref, horizon=horizon)
                        if discrete else None)
                return opt, certs, four
            got = timed(name, _almost)
            if got is not None:
                opt, certs, four = got
                report.certificates.extend(certs)
                report.profiles["optimal_constants"] = {
                    "c": opt["c"], "delta": opt["delta"]}
                if four is not None:
                    report.profiles["four_way"] = four

        elif name == "invariant":
            def _invariant():
                found = []
                if discrete:
                    res = solve_cesaro_adjoint(system, m_ref)
                    found.append(res)
                    for other in solve_eigen(system):
                        found.append(other)
                else:
                    found.extend(solve_continuous(system))
                return found
            found = timed(name, _invariant)
            if found is not None:
                for res in found:
                    report.invariants_found.append({
                        "labels": list(res.nu.space.labels),
                        "weights": res.nu.weights,
                        "mass": res.nu.mass,
                        "residual": res.residual,
                        "method": res.method,
                        "converged": res.converged,
                    })
                constructive = found[0]
                if constructive.nu.mass <= 1e-12 * m_ref.mass:
                    report.profiles["invariant_note"] = (
                        "no invariant measure absolutely continuous with "
                        "respect to the reference")

        elif name == "convergence":
            def _convergence():
                if not discrete:
                    raise ValueError("convergence stage needs a kernel")
                candidates = [r for r in solve_eigen(system)]
                if len(candidates) != 1:
                    raise ValueError("needs a unique invariant probability")
                m_inv = candidates[0].nu.normalized()
                v = V if V is not None else StateFn.constant(system.space,
                                                             0.0)
                grid = opts.get("grid")
                if grid is None:
                    return decay_report(system, m_inv, v)
                return decay_report(system, m_inv, v, n_grid=grid)
            rep = timed(name, _convergence)
            if rep is not None:
                report.profiles["decay"] = {
                    "ns": list(rep.ns), "norms": list(rep.norms),
                    "fitted_gamma": rep.fitted_gamma,
                    "fitted_C": rep.fitted_C, "r2": rep.r2,
                    "geometric": rep.geometric,
                    "envelope_ok": rep.envelope_ok,
                }

        elif name == "harnack":
            def _harnack():
                if not discrete:
                    raise ValueError("harnack stage needs a kernel")
                if V is None:
                    raise ValueError("harnack stage needs a lyapunov "
                                     "companion")
                window = C
                if window is None:
                    cut = float(np.median(V.values))
                    window = StateSet.from_mask(system.space,
                                                V.values <= cut)
                return certify_harnack_pipeline(
                    system, V, window, z0=opts.get("z0"),
                    p=float(opts.get("p", 2.0)), horizon=horizon)
            cert = timed(name, _harnack)
            if cert is not None:
                report.certificates.append(cert)

        else:
            report.errors.append(f"{name}: unknown step")

    return _emit(report, config, base_dir)


def _emit(report: Report, config, base_dir) -> Report:
    base = Path(base_dir) if base_dir is not None else Path(".")
    if "out" in config:
        eio.save_document(report.to_doc(), base / config["out"])
    if "csv_dir" in config:
        csv_dir = base / config["csv_dir"]
        csv_dir.mkdir(parents=True, exist_ok=True)
        idx = report.profiles.get("index")
        if idx is not None:
            crisp = idx["crisp"] or [None] * len(idx["epsilons"])
            frac = idx["fractional"] or [None] * len(idx["epsilons"])
            eio.write_series_csv(
                csv_dir / "index_profile.csv",
                ["epsilon", "crisp", "fractional"],
                list(zip(idx["epsilons"], crisp, frac)))
        decay = report.profiles.get("decay")
        if decay is not None:
            eio.write_series_csv(
                csv_dir / "decay.csv", ["n", "norm"],
                list(zip(decay["ns"], decay["norms"])))
    return report
