"""Command-line experiment runner.

Usage::

    sparsepc <indexset|solve|rates|verify|identity> --config FILE [--out DIR] [--seed S] [--jobs K]

Every run writes ``report.txt`` and ``manifest.txt`` next to its CSV outputs.
Exit status: 0 when every check passes, 2 on a property violation, 3 on a
configuration or precondition failure.
"""

from __future__ import annotations

import argparse
import io
import platform
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .config import ExperimentConfig, load_config
from .errors import ConfigError, SparsePCError
from .indices import (
    IndexSet,
    build_index_set,
    check_downward_closed,
    growth_constants,
    stechkin_check,
)
from .pc import (
    MonteCarloEstimator,
    ParametricProblem,
    PolySpec,
    TensorEstimator,
    coefficients_csv,
    compute_expansion,
    error_curve,
    errors_csv,
    evaluate_solution,
    fit_slope,
    summability_report,
    weighted_identity_check,
)
from .torus import hnorm
from .verify import (
    EXIT_PRECONDITION,
    HolomorphyParams,
    Report,
    exp_moment_closed,
    exp_moment_mc,
    growth_bound_check,
    perturbation_sweep,
    sparsity_check,
    strip_bound_probe,
)

CSV_SCHEMA = "1"
COMMANDS = ("indexset", "solve", "rates", "verify", "identity")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - running from a source tree
        return "unknown"


def lambda_csv(index_set: IndexSet) -> str:
    buf = io.StringIO()
    buf.write("position,nu,c_weight\n")
    for i, nu in enumerate(index_set):
        c = f"{index_set.weights[i]:.17g}" if index_set.weights else ""
        buf.write(f"{i + 1},{nu},{c}\n")
    return buf.getvalue()


def _add_index_checks(report: Report, index_set: IndexSet, cfg: ExperimentConfig, prefix: str, Ns) -> None:
    """Downward closure, Stechkin and (for power-law weights) growth checks on an enumeration."""
    report.check(f"{prefix}.downward_closed", check_downward_closed(index_set))
    p = cfg["weights.p"]
    q = p / (2.0 - p)
    for n in Ns:
        st = stechkin_check(index_set.weights, q, n)
        if not st.applicable:
            continue
        report.add(f"{prefix}.stechkin.N{n}", f"left={st.left:.17g} right={st.right:.17g}")
        report.check(f"{prefix}.stechkin.N{n}.holds", bool(st.holds))
    sw = index_set.surrogate
    if sw is None or not sw.rho.is_power_law:
        report.add(f"{prefix}.growth", "skipped (needs power-law rho)")
        return
    gc = growth_constants(sw, max(index_set.n_dims, 1))
    gr = growth_bound_check(index_set, gc.C, sw.K, gc.r1)
    report.add(f"{prefix}.growth.C", gc.C)
    report.add(f"{prefix}.growth.r1", gc.r1)
    report.add(f"{prefix}.growth.d0", gc.d0)
    report.add(f"{prefix}.growth.worst_ratio", gr.worst_ratio)
    report.check(f"{prefix}.growth.holds", gr.holds)
    if not gr.holds:
        report.add(f"{prefix}.growth.first_violation", gr.first_violation)


def run_indexset(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    report = Report("indexset")
    sw = cfg.surrogate(cfg["indexset.dim_cap"])
    if sw.warning:
        report.add("warning", sw.warning)
    lam = build_index_set(cfg["indexset.N"], sw, cfg["indexset.dim_cap"])
    (out / "lambda.csv").write_text(lambda_csv(lam))
    m, d = lam.metrics
    report.add("N", len(lam))
    report.add("K", sw.K)
    report.add("log_C_beta", sw.log_C_beta)
    report.add("m_lambda", m)
    report.add("d_lambda", d)
    _add_index_checks(report, lam, cfg, "lambda", [max(1, len(lam) // 2)])
    return report


def _problem(cfg: ExperimentConfig, J: int | None = None) -> ParametricProblem:
    grid = cfg.grid()
    return cfg._wrap(
        ("basis.t", "pc.J", "rhs.kind"),
        lambda: ParametricProblem(cfg.basis(), cfg.model(), cfg.rhs(grid), J or cfg["pc.J"], cfg["pc.s_out"], cfg.solver()),
    )


def run_solve(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    report = Report("solve")
    problem = _problem(cfg)
    y = np.zeros(problem.J)
    if cfg["solve.y"] is not None:
        y[: len(cfg["solve.y"])] = cfg["solve.y"]
    u = evaluate_solution(problem, y)
    (out / "field.csv").write_text(u.to_csv())
    (out / "field.bin").write_bytes(u.to_bytes())
    report.add("y", " ".join(f"{v:.17g}" for v in y))
    report.add("max_abs", u.sup_norm())
    report.add("norm_H1", hnorm(u, 1.0))
    if cfg["pc.s_out"] != 1.0:
        report.add(f"norm_H{cfg['pc.s_out']:g}", hnorm(u, cfg["pc.s_out"]))
    report.check("real_solution", u.is_real())
    return report


def run_rates(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    report = Report("rates")
    problem = _problem(cfg)
    J = problem.J
    sw = cfg.surrogate(J)
    ref = build_index_set(cfg["pc.ref_size"], sw, J)
    if cfg["estimator.kind"] == "tensor":
        est = TensorEstimator(pad=cfg["estimator.pad"])
    else:
        est = MonteCarloEstimator(cfg["estimator.samples"], cfg.seed)
    exp = compute_expansion(problem, ref, est, jobs=jobs)
    curve = error_curve(exp, cfg["pc.Ns"])
    rho = sw.rho
    M = cfg["weights.M"]
    (out / "lambda.csv").write_text(lambda_csv(ref))
    (out / "coeffs.csv").write_text(coefficients_csv(exp, M, rho))
    (out / "errors.csv").write_text(errors_csv(exp, curve))

    for key, value in exp.meta.items():
        report.add(f"estimator.{key}", value if not isinstance(value, tuple) else " ".join(map(str, value)))
    report.add("K", sw.K)
    report.add("ref_size", len(ref))
    report.add("theoretical_exponent", 1.0 / cfg["weights.p"] - 0.5)
    positive = [(n, e) for n, e in curve if e > 0]
    if len(positive) >= 3:
        slope = fit_slope(positive)
        report.add("slope", slope)
        report.check("slope_within_bound", slope <= cfg["pc.max_slope"])
    else:
        report.add("slope", "not enough positive errors")
    summ = summability_report(exp, cfg["weights.p"], M, rho)
    report.add("summability.weighted_sum", summ.weighted_sum)
    report.add("summability.lp_sum", summ.lp_sum)
    report.add("summability.tail_exponent", summ.tail_exponent)
    for n, w, lp in summ.checkpoints():
        report.add(f"summability.prefix.{n}", f"weighted={w:.17g} lp={lp:.17g}")
    report.add("summability.weighted_increment", summ.weighted_increment)
    report.add("summability.lp_increment", summ.lp_increment)
    report.check("summability.stable", summ.stable)
    _add_index_checks(report, ref, cfg, "ref", cfg["pc.Ns"])

    Ns = [n for n in cfg["pc.sparsity_Ns"] if 2 <= n <= len(ref)]
    if rho.is_power_law and Ns:
        gc = growth_constants(sw, J)
        sp = sparsity_check(ref, Ns, gc.C, sw.K, gc.r1, M, gc.d0)
        for n, m, d, bound, ratio in zip(sp.Ns, sp.m_values, sp.d_values, sp.m_bounds, sp.d_ratios):
            report.add(f"sparsity.N{n}", f"m={m} d={d} m_bound={bound:.17g} d_over_log2N={ratio:.17g}")
        report.check("sparsity.m_bound", sp.m_holds)
        report.check("sparsity.d_ratio_nonincreasing", sp.d_nonincreasing)
    return report


def run_verify(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    report = Report("verify")
    b = cfg["verify.moment_b"]
    alpha = cfg["verify.moment_alpha"]
    try:
        closed = exp_moment_closed(b, alpha)
    except SparsePCError as exc:
        report.precondition("moment.closed", str(exc))
    else:
        mc = exp_moment_mc(b, alpha, 2.0, cfg["verify.mc_samples"], cfg.seed)
        report.add("moment.closed", closed)
        report.add("moment.mc", mc.estimate)
        report.add("moment.stderr", mc.stderr)
        report.check("moment.agree_3se", abs(mc.estimate - closed) <= 3 * mc.stderr)

    grid = cfg.grid()
    sweep = perturbation_sweep(grid, cfg["verify.perturbation_cases"], cfg.seed, cfg.solver())
    bad = [i for i, r in enumerate(sweep) if not r.holds]
    report.add("perturbation.cases", len(sweep))
    report.add("perturbation.max_ratio", max((r.lhs / r.rhs for r in sweep if r.rhs > 0), default=0.0))
    report.add("perturbation.violations", len(bad))
    report.check("perturbation.holds", not bad)

    J = cfg["pc.J"]
    sw = cfg.surrogate(J)
    if sw.rho.is_power_law:
        ref = build_index_set(cfg["pc.ref_size"], sw, J)
        gc = growth_constants(sw, J)
        gr = growth_bound_check(ref, gc.C, sw.K, gc.r1)
        report.add("growth.worst_ratio", gr.worst_ratio)
        report.check("growth.holds", gr.holds)
    else:
        report.add("growth", "skipped (needs power-law rho)")

    params = cfg._wrap(
        ("verify.C", "verify.alpha", "verify.tau", "verify.theta"),
        lambda: HolomorphyParams(cfg["verify.C"], cfg["verify.alpha"], cfg["verify.tau"], cfg["verify.theta"]),
    )
    probe = strip_bound_probe(_problem(cfg, cfg["verify.strip_J"]), params, cfg["verify.strip_probes"], cfg.seed)
    report.add("strip.probes", probe.probes)
    report.add("strip.evaluated", probe.evaluated)
    report.add("strip.out_of_strip", probe.out_of_strip)
    report.add("strip.violations", probe.violations)
    report.add("strip.violation_fraction", probe.violation_fraction)
    report.add("strip.max_ratio", probe.max_ratio)
    # diagnostic only: a violation rejects the candidate constants, not a property
    report.add("strip.note", "diagnostic; violations indicate the candidate constants are too small")
    return report


def identity_battery(seed: int, cases: int, max_dim: int, max_degree: int) -> list[tuple[str, PolySpec, int, list[float]]]:
    """Fixed examples followed by ``cases`` random polynomials."""
    out = [
        ("y1^2", PolySpec.from_dict({(2,): 1.0}, 1), 2, [1.0]),
        ("one", PolySpec.from_dict({(0,): 1.0}, 1), 3, [0.7]),
        ("y1*y2", PolySpec.from_dict({(1, 1): 1.0}, 2), 1, [1.0, 1.0]),
    ]
    rng = np.random.Generator(np.random.Philox(key=seed))
    for i in range(cases):
        N = int(rng.integers(1, max_dim + 1))
        terms = {}
        for _ in range(int(rng.integers(1, 6))):
            deg = int(rng.integers(0, max_degree + 1))
            alpha = [0] * N
            for _ in range(deg):
                alpha[int(rng.integers(0, N))] += 1
            terms[tuple(alpha)] = float(rng.uniform(-2.0, 2.0))
        rho = [float(r) for r in rng.uniform(1e-3, 2.0, size=N)]
        out.append((f"random{i}", PolySpec.from_dict(terms, N), int(rng.integers(1, 5)), rho))
    return out


def run_identity(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    report = Report("identity")
    battery = identity_battery(cfg.seed, cfg["identity.cases"], cfg["identity.max_dim"], cfg["identity.max_degree"])
    worst = 0.0
    for name, poly, M, rho in battery:
        lhs, rhs = weighted_identity_check(poly, M, rho)
        rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, rel)
        report.add(f"case.{name}", f"M={M} lhs={lhs:.17g} rhs={rhs:.17g} rel={rel:.3g}")
    report.add("worst_relative_difference", worst)
    report.check("identity.holds", worst <= 1e-10)
    return report


RUNNERS = {
    "indexset": run_indexset,
    "solve": run_solve,
    "rates": run_rates,
    "verify": run_verify,
    "identity": run_identity,
}


def write_manifest(out: Path, cfg: ExperimentConfig | None, command: str, seed, jobs: int, status: str) -> None:
    lines = [
        f"command: {command}",
        f"config_sha256: {cfg.digest if cfg else 'unavailable'}",
        f"seed: {seed}",
        f"jobs: {jobs}",
        f"status: {status}",
        f"csv_schema: {CSV_SCHEMA}",
        f"package_version: {_version()}",
        f"python: {platform.python_version()}",
        f"numpy: {np.__version__}",
        f"scipy: {scipy.__version__}",
        f"timestamp: {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
    ]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsepc", description="Sparse Wiener-Hermite expansion experiments.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="experiment configuration file")
    parser.add_argument("--out", help="output directory (default: output.dir from the config)")
    parser.add_argument("--seed", type=_u64, help="override experiment.seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for coefficient computation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_PRECONDITION
    cfg = None
    try:
        cfg = load_config(args.config, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    out = Path(args.out) if args.out else Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = RUNNERS[args.command](cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        write_manifest(out, cfg, args.command, cfg.seed, args.jobs, "precondition")
        return EXIT_PRECONDITION
    except SparsePCError as exc:
        report = Report(args.command)
        report.precondition("error", f"{type(exc).__name__}: {exc}")
    (out / "report.txt").write_text(report.to_text())
    write_manifest(out, cfg, args.command, cfg.seed, args.jobs, report.status)
    print(report.to_text(), end="")
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
