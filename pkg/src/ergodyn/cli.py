"""Experiment runner.

    ergodyn <command> (--config PATH | --preset NAME) [--out DIR]
                      [--seed U64] [--threads N]

Commands: simulate, check, lyapunov, dependence, clt, coalescence,
counterexample.  Every run writes a human-readable ``report.txt`` (always,
including failing runs) plus plot-ready CSV files; outputs are bit-identical
across reruns with the same configuration and seed.  Exit codes: 0 success,
1 configuration error, 2 condition-check failure verdict.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import (COMMANDS, ExperimentConfig, PRESET_NAMES, load_config, preset,
                     serialize)
from .dependence import estimate_theta
from .limits import Functional, GrowthConditionError, partial_sum_stats
from .models import FINITE_ALPHABET, contraction_metadata
from .noise import ConfigurationError
from .rng import SeedStream
from .stationarity import (CoalescenceReport, NonContractiveError, Verdict,
                           check_conditions, coalescence_times, gap_profile,
                           lyapunov_estimate, stationary_path)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERDICT = 2


def _fmt(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_atomic(path: str, text: str) -> None:
    """Write via temp file + rename so partial files never appear."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".ergodyn-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    write_atomic(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

class Report:
    def __init__(self, config: ExperimentConfig, source: str):
        self.lines: list[str] = [
            f"ergodyn {__version__} report",
            f"command: {config.run.command}",
            f"config: {source}",
            f"seed: {config.run.seed}",
            "",
            "[configuration]",
        ]
        self.lines.extend(serialize(config).rstrip().splitlines())
        self.lines.append("")

    def section(self, title: str) -> None:
        self.lines.append(f"[{title}]")

    def line(self, text: str = "") -> None:
        self.lines.append(text)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _report_certificate(rep: Report, cert) -> None:
    rep.section("certificate")
    rep.line(f"p = {_fmt(cert.p)}, o = {_fmt(cert.o)}")
    if cert.a_matrices is not None:
        for i, a in enumerate(cert.a_matrices, start=1):
            rep.line(f"A_{i} = {np.array2string(np.asarray(a), precision=12)}")
        rep.line(f"rho(sum A_i) = {_fmt(cert.rho_sum)}")
        rep.line(f"rho(B) = {_fmt(cert.rho_companion)}")
    if cert.m is not None:
        rep.line(f"m = {cert.m}, kappa = {_fmt(cert.kappa)}, "
                 f"L = {_fmt(cert.one_step_bound)}")
    for key in sorted(cert.scalars):
        val = cert.scalars[key]
        if isinstance(val, tuple):
            rep.line(f"{key} = ({', '.join(_fmt(v) for v in val)})")
        else:
            rep.line(f"{key} = {val:g}")
    rep.line()


def _report_verdicts(rep: Report, verdicts: dict[str, Verdict]) -> None:
    rep.section("verdicts")
    for name in sorted(verdicts):
        v = verdicts[name]
        detail = f" ({v.detail})" if v.detail else ""
        rep.line(f"{name}: {v.status}{detail}")
    rep.line()


def _simulation_gate(spec, cert, verdicts) -> tuple[bool, str]:
    """Whether a stationary simulation is justified, and why not if not."""
    if spec.family == "binary_choice":
        v = verdicts.get("full_support")
        if v is not None and v.holds:
            return True, ""
        if cert.contractive:
            return True, ""
        return False, "full_support fails and no contraction certificate"
    if spec.family == "categorical":
        v = verdicts.get("kernel_floor")
        if v is not None and v.holds:
            return True, ""
        return False, "kernel_floor does not hold"
    if cert.contractive:
        return True, ""
    return False, "no contraction certificate (kappa >= 1)"


# ---------------------------------------------------------------------------
# command handlers: each returns an exit code
# ---------------------------------------------------------------------------

def _cmd_check(config, rep, out, stream, threads) -> int:
    cert, verdicts = check_conditions(config.model, config.covariate)
    _report_certificate(rep, cert)
    _report_verdicts(rep, verdicts)
    ok, why = _simulation_gate(config.model, cert, verdicts)
    rep.section("summary")
    rep.line("certified" if ok else f"not certified: {why}")
    return EXIT_OK if ok else EXIT_VERDICT


def _cmd_simulate(config, rep, out, stream, threads) -> int:
    cert, verdicts = check_conditions(config.model, config.covariate)
    _report_certificate(rep, cert)
    _report_verdicts(rep, verdicts)
    ok, why = _simulation_gate(config.model, cert, verdicts)
    if not ok:
        rep.section("summary")
        rep.line(f"refused: {why}")
        return EXIT_VERDICT
    run = config.run
    traj = stationary_path(config.model, config.covariate, stream, run.n,
                           run.tol, run.s_max, certificate=cert)
    k = config.model.k
    e = traj["z"].shape[1]
    header = (["t"] + [f"state_{i+1}" for i in range(k)]
              + [f"z_{j+1}" for j in range(e)] + ["eps"])
    rows = (
        [int(t)] + list(traj["head"][i]) + list(traj["z"][i]) + [traj["eps"][i]]
        for i, t in enumerate(traj["t"])
    )
    write_csv(os.path.join(out, "trajectory.csv"), header, rows)
    rep.section("simulate")
    rr = traj["report"]
    rep.line(f"n = {run.n}")
    rep.line(f"backward horizon = {rr.horizon}, gap = {_fmt(rr.gap)}, "
             f"coalesced = {rr.coalesced}")
    rep.line(f"trajectory written to trajectory.csv")
    return EXIT_OK


def _cmd_lyapunov(config, rep, out, stream, threads) -> int:
    cert, verdicts = check_conditions(config.model, config.covariate)
    _report_certificate(rep, cert)
    _report_verdicts(rep, verdicts)
    run = config.run
    chi, se, per = lyapunov_estimate(config.model, config.covariate, stream,
                                     run.n, run.replicates, threads)
    write_csv(os.path.join(out, "lyapunov.csv"), ["replicate", "chi_hat"],
              ((r, v) for r, v in enumerate(per)))
    rep.section("lyapunov")
    rep.line(f"chi_hat = {_fmt(chi)}")
    rep.line(f"stderr = {_fmt(se)}  (n = {run.n}, replicates = {run.replicates})")
    rep.line(f"negative: {'yes' if chi < 0 else 'no'}")
    return EXIT_OK


def _cmd_dependence(config, rep, out, stream, threads) -> int:
    cert, verdicts = check_conditions(config.model, config.covariate)
    _report_certificate(rep, cert)
    _report_verdicts(rep, verdicts)
    run = config.run
    try:
        prof = estimate_theta(config.model, config.covariate, stream,
                              t_max=run.t_max, replicates=run.replicates,
                              burn=run.burn, threads=threads)
    except NonContractiveError as exc:
        rep.section("summary")
        rep.line(f"refused: {exc}")
        return EXIT_VERDICT
    write_csv(os.path.join(out, "dependence.csv"),
              ["t", "theta_hat", "stderr", "bound_shape"],
              ((int(t), prof.theta_hat[i], prof.theta_se[i], prof.bound_shape[i])
               for i, t in enumerate(prof.t)))
    rep.section("dependence")
    rep.line(f"p = {_fmt(prof.p)}, o = {_fmt(prof.o)}, t_max = {run.t_max}, "
             f"replicates = {run.replicates}")
    rep.line(f"burn-in = {prof.burn_used} (residual bound {prof.residual_bound:.3g})")
    rep.line(f"fitted decay rate = {_fmt(prof.rho_fit)}")
    rep.line(f"envelope decay rate = {_fmt(prof.rho_bound)}")
    return EXIT_OK


def _cmd_clt(config, rep, out, stream, threads) -> int:
    cert, verdicts = check_conditions(config.model, config.covariate)
    _report_certificate(rep, cert)
    _report_verdicts(rep, verdicts)
    run = config.run
    fn = Functional(kind=run.functional, exponent=run.functional_exponent,
                    cap=run.functional_cap, lag=run.functional_lag)
    try:
        report = partial_sum_stats(config.model, config.covariate, stream, fn,
                                   run.n, run.replicates, run.tol,
                                   run.moment_order, run.moment_bound, threads)
    except GrowthConditionError as exc:
        rep.section("summary")
        rep.line(f"refused: {exc}")
        return EXIT_VERDICT
    write_csv(os.path.join(out, "clt.csv"), ["replicate", "standardized_sum"],
              ((r, v) for r, v in enumerate(report.standardized)))
    rep.section("clt")
    rep.line(f"n = {report.n}, replicates = {report.replicates}, "
             f"functional = {run.functional}")
    rep.line(f"sigma2 (batch means) = {_fmt(report.sigma2_batch)}")
    rep.line(f"sigma2 (plug-in)    = {_fmt(report.sigma2_plugin)}")
    rep.line(f"skewness = {_fmt(report.skewness)}, excess kurtosis = "
             f"{_fmt(report.excess_kurtosis)}")
    rep.line(f"KS distance to N(0,1) = {_fmt(report.ks_distance)}")
    rep.line(f"moment route: {report.moment_route}")
    for note in report.notes:
        rep.line(f"note: {note}")
    return EXIT_OK


def _cmd_coalescence(config, rep, out, stream, threads) -> int:
    cert, verdicts = check_conditions(config.model, config.covariate)
    _report_certificate(rep, cert)
    _report_verdicts(rep, verdicts)
    if config.model.family not in FINITE_ALPHABET:
        raise ConfigurationError("run.command: coalescence needs a finite-alphabet model")
    run = config.run
    result = coalescence_times(config.model, config.covariate, stream,
                               run.replicates, run.coalescence_cap, threads)
    write_csv(os.path.join(out, "coalescence.csv"),
              ["replicate", "coalescence_time"],
              ((r, int(t)) for r, t in enumerate(result.times)))
    ok, why = _simulation_gate(config.model, cert, verdicts)
    rep.section("coalescence")
    n_ok = result.times[result.times > 0]
    rep.line(f"replicates = {run.replicates}, cap = {run.coalescence_cap}")
    rep.line(f"censored = {result.censored} "
             f"(rate {result.censored / run.replicates:.3g})")
    if len(n_ok):
        rep.line(f"mean T = {_fmt(float(n_ok.mean()))}, max T = {int(n_ok.max())}")
    if result.geometric_rate is not None:
        rep.line(f"geometric bound rate = {_fmt(result.geometric_rate)}")
        rep.line("survival vs bound (k, empirical, bound):")
        for k in range(1, 11):
            emp = result.survival(k)
            rep.line(f"  {k}, {emp:.4f}, {result.geometric_rate ** k:.4f}")
    if not ok:
        rep.line(f"warning: {why}; censoring expected")
        return EXIT_VERDICT
    return EXIT_OK


def _cmd_counterexample(config, rep, out, stream, threads) -> int:
    cert, verdicts = check_conditions(config.model, config.covariate)
    _report_certificate(rep, cert)
    _report_verdicts(rep, verdicts)
    run = config.run
    horizons = run.horizons or (2, 4, 8, 12, 16, 24, 32)
    h, gap, se = gap_profile(config.model, config.covariate, stream, horizons,
                             replicates=run.replicates, threads=threads)
    write_csv(os.path.join(out, "meangap.csv"), ["s", "mean_gap", "stderr"],
              ((int(h[i]), gap[i], se[i]) for i in range(len(h))))
    rep.section("mean gap")
    rep.line("s, mean_gap, stderr")
    for i in range(len(h)):
        rep.line(f"  {int(h[i])}, {gap[i]:.6g}, {se[i]:.3g}")
    decay = verdicts.get("mean_gap_decay")
    growing = bool(gap[-1] > gap[0])
    analytic = decay is not None and decay.status == "fails"
    rep.section("summary")
    if analytic or (decay is None and growing) or (
            decay is not None and decay.status == "undecidable" and growing):
        why = decay.detail if analytic else "empirical mean gap grows"
        rep.line(f"non-convergence in the mean: {why}")
        rep.line(f"empirical mean gap grows: {'yes' if growing else 'no'}")
        return EXIT_VERDICT
    rep.line("mean gap decays; backward iterations converge in the mean")
    rep.line(f"empirical mean gap grows: {'yes' if growing else 'no'}")
    return EXIT_OK


_HANDLERS = {
    "check": _cmd_check,
    "simulate": _cmd_simulate,
    "lyapunov": _cmd_lyapunov,
    "dependence": _cmd_dependence,
    "clt": _cmd_clt,
    "coalescence": _cmd_coalescence,
    "counterexample": _cmd_counterexample,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ergodyn",
        description="simulate and verify stationary nonlinear autoregressions "
                    "with exogenous covariates")
    ap.add_argument("command", choices=COMMANDS)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to an experiment configuration")
    src.add_argument("--preset", choices=PRESET_NAMES,
                     help="named built-in configuration")
    ap.add_argument("--out", default=".", help="output directory (default: cwd)")
    ap.add_argument("--seed", type=int, default=None, help="override run.seed")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads for replicate loops (results identical)")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config = load_config(args.config)
            source = args.config
        else:
            config = preset(args.preset)
            source = f"preset:{args.preset}"
        run_cfg = config.run
        if run_cfg.command != args.command:
            run_cfg = dataclasses.replace(run_cfg, command=args.command)
        if args.seed is not None:
            run_cfg = dataclasses.replace(run_cfg, seed=args.seed)
        config = dataclasses.replace(config, run=run_cfg)
    except (ConfigurationError, OSError) as exc:
        print(f"ergodyn: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    os.makedirs(args.out, exist_ok=True)
    stream = SeedStream(config.run.seed, 0)
    threads = args.threads if args.threads is not None else config.run.threads
    rep = Report(config, source)
    try:
        code = _HANDLERS[args.command](config, rep, args.out, stream, threads)
    except ConfigurationError as exc:
        print(f"ergodyn: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonContractiveError as exc:
        rep.section("summary")
        rep.line(f"refused: {exc}")
        code = EXIT_VERDICT
    write_atomic(os.path.join(args.out, "report.txt"), rep.text())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
