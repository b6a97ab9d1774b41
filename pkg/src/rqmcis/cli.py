"""Configuration-driven experiment runner and diagnostics reporter.

Two subcommands:

* ``run`` benchmarks the configured proposals on a problem, writes the
  RMSE table as CSV (one file per problem/family/sampler) plus a plain-text
  diagnostics report, and renders figures when the companion plotting
  package is installed;
* ``diagnose`` prints the proposal construction (mode, covariance spectrum)
  and the eigenvalue verdict for each method without running estimators.

Flags can be preloaded from a declarative ``key = value`` config file
(``--config``); explicit flags override file entries.  Runs are
deterministic in the seed: the same command produces byte-identical CSV.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from rqmcis import models
from rqmcis.digital_nets import NetSpec, owen_scramble, sobol_net
from rqmcis.estimators import (
    CSV_HEADER,
    MethodSpec,
    Problem,
    RmseTable,
    compute_reference,
    derive_seed,
    is_quadrature,
    rmse_experiment,
)
from rqmcis.is_core import Proposal, bgc_eigen_diagnostic, standard_gaussian
from rqmcis.positivization import positivized_estimate, v_minus, v_plus
from rqmcis.proposals import (
    Integrand,
    build_laplace,
    build_odis,
    build_prior,
    find_mode,
    to_student_t,
)

__all__ = ["RunConfig", "run", "diagnose", "main"]

PROBLEMS = ("bond", "logistic", "synthetic-exp", "positivization-demo")
METHODS = ("prioris", "odis", "lapis")

# Bond parameters are artifact choices; these defaults put the Laplace
# tail growth inside the probed |z| <= 8 window (see bond_tail_probe).
BOND_R0 = 0.2
BOND_SIGMA = 1.5
EXP_DRIFT = 0.25  # synthetic-exp uses a = (0.25, ..., 0.25) in d = 4


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; round-trips through ``to_text``/``from_text``."""

    problem: str = "logistic"
    methods: tuple[str, ...] = ("prioris", "odis", "lapis")
    family: str = "gaussian"
    nu: float = 4.0
    sampler: str = "rqmc"
    n_grid: tuple[int, ...] = tuple(2**m for m in range(7, 14))
    replicates: int = 100
    seed: int = 0
    rows: int | None = 30
    standardize: bool = True
    data_path: str | None = None
    eta: float = 1.0
    bond_r0: float = BOND_R0
    bond_sigma: float = BOND_SIGMA
    exp_dim: int = 4
    outdir: str = "."
    figures: bool = True

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if not self.methods:
            raise ValueError("method list is empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
        if self.family not in ("gaussian", "student_t"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.sampler not in ("mc", "rqmc"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        grid = list(self.n_grid)
        if not grid or any(n & (n - 1) or n < 1 for n in grid) or grid != sorted(set(grid)):
            raise ValueError("N grid must be strictly ascending powers of 2")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            kwargs[key] = _coerce(key, value)
        return cls(**kwargs)


def _coerce(key: str, value: str):
    if key == "methods":
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if key == "n_grid":
        return tuple(parse_n_grid(value))
    if key in ("replicates", "seed", "exp_dim"):
        return int(value)
    if key == "rows":
        return None if value in ("None", "all", "") else int(value)
    if key in ("nu", "eta", "bond_r0", "bond_sigma"):
        return float(value)
    if key in ("standardize", "figures"):
        return value.lower() in ("1", "true", "yes", "on")
    if key == "data_path":
        return None if value in ("None", "") else value
    return value


def parse_n_grid(text: str) -> list[int]:
    """Parse '2^7..2^13' ranges or comma lists like '128,256,512'."""

    def one(tok: str) -> int:
        tok = tok.strip()
        return 2 ** int(tok[2:]) if tok.startswith("2^") else int(tok)

    if ".." in text:
        lo, hi = (one(t) for t in text.split("..", 1))
        m_lo, m_hi = lo.bit_length() - 1, hi.bit_length() - 1
        return [2**m for m in range(m_lo, m_hi + 1)]
    return [one(t) for t in text.split(",")]


# ---------------------------------------------------------------------------
# problem and proposal resolution
# ---------------------------------------------------------------------------

@dataclass
class ResolvedMethod:
    spec: MethodSpec
    diagnostic: object
    mode_iterations: int


def _build_problem(config: RunConfig) -> Problem:
    if config.problem == "bond":
        model = models.BondModel(r0=config.bond_r0, sigma=config.bond_sigma)
        return Problem("bond", standard_gaussian(1), models.bond_integrand(model))
    if config.problem == "logistic":
        model = models.logistic_load(
            config.data_path, rows=config.rows, standardize=config.standardize
        )
        return Problem(
            f"logistic{model.n}",
            standard_gaussian(model.d),
            models.logistic_integrand(model),
            test_function=models.logistic_test_fn(),
        )
    if config.problem == "synthetic-exp":
        d = config.exp_dim
        return Problem(
            "synthetic-exp", standard_gaussian(d), models.exp_integrand(np.full(d, EXP_DRIFT))
        )
    raise ValueError(f"problem {config.problem!r} has no estimator grid")


def _resolve_methods(config: RunConfig, problem: Problem) -> list[ResolvedMethod]:
    base = problem.base
    resolved = []
    for name in config.methods:
        if name == "prioris":
            prop, iterations = build_prior(base), 0
        else:
            builder = build_odis if name == "odis" else build_laplace
            prop = builder(problem.integrand, base)
            iterations = find_mode(problem.integrand, base).iterations
        diag = bgc_eigen_diagnostic(prop.root_l, base)
        if config.family == "student_t":
            prop = to_student_t(prop, config.nu)
        resolved.append(ResolvedMethod(MethodSpec(name, prop), diag, iterations))
    return resolved


def _closed_form_refs(config: RunConfig, problem: Problem):
    if config.problem == "synthetic-exp":
        a = np.full(config.exp_dim, EXP_DRIFT)
        return {"value": (models.exp_true_value(a, problem.base), "closed-form-mgf")}
    if config.problem == "bond":
        nodes, weights = np.polynomial.hermite_e.hermegauss(200)
        g = problem.integrand.eval_g(nodes[:, None])
        value = float(weights @ g / math.sqrt(2.0 * math.pi))
        return {"value": (value, "gauss-hermite-200")}
    return None  # logistic: self-consistent RQMC reference


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _diagnostics_text(config: RunConfig, problem: Problem, resolved) -> str:
    lines = [
        f"problem: {problem.name}",
        f"family: {config.family}"
        + (f" (nu={config.nu})" if config.family == "student_t" else ""),
        "",
    ]
    for rm in resolved:
        diag = rm.diagnostic
        mode = rm.spec.proposal.mu
        verdict = "PASS" if diag.passes else "FAIL"
        lines.append(f"[{rm.spec.name}]")
        lines.append(f"  mode mu* = {np.array2string(mode, precision=6)}")
        if rm.mode_iterations:
            lines.append(f"  newton iterations = {rm.mode_iterations}")
        lines.append(
            "  eigenvalues of L' Sigma0^-1 L = "
            + np.array2string(np.asarray(diag.eigenvalues), precision=6)
        )
        lines.append(f"  min eigenvalue = {diag.min_eig:.12g}")
        lines.append(f"  verdict: {verdict} (threshold 1 - {diag.tol:g})")
        if not diag.passes:
            lines.append(
                "  note: likelihood-ratio factor violates the boundary growth"
            )
            lines.append(
                "  condition; expect the RQMC error rate to degrade toward the"
            )
            lines.append("  MC rate O(N^-1/2) instead of O(N^-(1-eps)).")
        lines.append("")
    return "\n".join(lines)


def _slope_text(table: RmseTable, n_grid) -> str:
    lines = ["fitted log2-log2 slopes (window = configured N grid):"]
    for method in table.methods():
        try:
            fit = table.slope(method, n_min=min(n_grid), n_max=max(n_grid))
        except ValueError as exc:
            lines.append(f"  {method}: slope unavailable ({exc})")
            continue
        lines.append(
            f"  {method}: slope = {fit.slope:+.3f} (stderr {fit.stderr:.3f}, "
            f"{fit.n_points} points)"
        )
    return "\n".join(lines) + "\n"


def _run_positivization_demo(config: RunConfig, out):
    """Soft (smooth partition) vs hard (max(G,0)) positivization comparison.

    The hard split is a comparison baseline only; its kinks break the
    boundary growth condition.
    """
    base = standard_gaussian(1)
    f = models.signed_cubic_integrand()
    prop_plus = Proposal("gaussian", [0.5], [[1.0]])
    prop_minus = Proposal("gaussian", [-0.5], [[1.0]])
    pos = Integrand(1, lambda zz: np.maximum(f.eval_g(zz), 0.0))
    neg = Integrand(1, lambda zz: np.maximum(-f.eval_g(zz), 0.0))

    def hard_estimate(points):
        return is_quadrature(pos, prop_plus, base, points) - is_quadrature(
            neg, prop_minus, base, points
        )

    rows = []
    for n in config.n_grid:
        m = n.bit_length() - 1
        soft_sq = hard_sq = 0.0
        for r in range(config.replicates):
            seed = derive_seed(config.seed, "positivization", n, r)
            ps = owen_scramble(sobol_net(NetSpec(m=m, d=1)), seed)
            soft_sq += positivized_estimate(f, prop_plus, prop_minus, base, ps, config.eta) ** 2
            hard_sq += hard_estimate(ps) ** 2
        rows.append((n, math.sqrt(soft_sq / config.replicates), math.sqrt(hard_sq / config.replicates)))
    path = f"{config.outdir}/positivization-demo_gaussian_{config.sampler}.csv"
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for n, soft, hard in rows:
            fh.write(f"soft-pos,gaussian,,{n},{config.replicates},{soft!r},0.0,closed-form,{config.seed}\n")
            fh.write(f"hard-pos,gaussian,,{n},{config.replicates},{hard!r},0.0,closed-form,{config.seed}\n")
    print(f"wrote {path}", file=out)
    return [path]


def _render_figures(config: RunConfig, csv_paths, out) -> None:
    try:
        from rqmcis_plots import FigureSpec, render
    except ImportError:
        print("figures skipped: rqmcis-plots is not installed", file=out)
        return
    for path in csv_paths:
        image = path.rsplit(".", 1)[0] + ".png"
        spec = FigureSpec(csv_paths={config.sampler: path}, output_path=image)
        render(spec)
        print(f"wrote {image}", file=out)


def run(config: RunConfig, out=sys.stdout, err=sys.stderr) -> int:
    """Execute a run; returns the process exit status."""
    config = config.validate()
    if config.problem == "positivization-demo":
        csv_paths = _run_positivization_demo(config, out)
        if config.figures:
            _render_figures(config, csv_paths, out)
        return 0

    problem = _build_problem(config)
    failures = []
    try:
        resolved = _resolve_methods(config, problem)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: proposal construction failed: {exc}", file=err)
        return 1

    refs = _closed_form_refs(config, problem)
    if refs is None:
        try:
            refs = compute_reference(
                problem, _reference_method(resolved), config.n_grid, config.seed
            )
        except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            print(f"error: reference computation failed: {exc}", file=err)
            return 1

    tables = []
    for rm in resolved:
        try:
            table = rmse_experiment(
                problem,
                [rm.spec],
                config.n_grid,
                config.replicates,
                config.seed,
                config.sampler,
                c_refs=refs,
            )
            tables.append(table)
        except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            failures.append((rm.spec.name, str(exc)))
            print(f"method {rm.spec.name} failed: {exc}", file=err)

    rows = tuple(row for table in tables for row in table.rows)
    merged = RmseTable(rows=rows, seed0=config.seed)
    tag = f"{problem.name}_{config.family}_{config.sampler}"
    csv_path = f"{config.outdir}/{tag}.csv"
    merged.to_csv(csv_path)
    print(f"wrote {csv_path}", file=out)

    report = _diagnostics_text(config, problem, resolved)
    if rows:
        report += _slope_text(merged, config.n_grid)
    if failures:
        report += "failed methods:\n" + "".join(
            f"  {name}: {msg}\n" for name, msg in failures
        )
    report_path = f"{config.outdir}/{tag}_diagnostics.txt"
    with open(report_path, "w") as fh:
        fh.write(report)
    print(f"wrote {report_path}", file=out)
    if config.figures:
        _render_figures(config, [csv_path], out)
    return 1 if failures else 0


def _reference_method(resolved) -> MethodSpec:
    """Reference integrals come from the most reliable passing proposal."""
    for rm in resolved:
        if rm.spec.name == "odis":
            return rm.spec
    return resolved[0].spec


def diagnose(config: RunConfig, out=sys.stdout, err=sys.stderr) -> int:
    """Print proposal diagnostics for the configured problem and methods."""
    config = config.validate()
    if config.problem == "positivization-demo":
        y = 3.0
        print(
            f"positivization: eta={config.eta}, v+({y})={v_plus(y, config.eta):.6f}, "
            f"v-({y})={v_minus(y, config.eta):.6f}",
            file=out,
        )
        return 0
    problem = _build_problem(config)
    try:
        resolved = _resolve_methods(config, problem)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    print(_diagnostics_text(config, problem, resolved), file=out)
    if config.problem == "bond":
        model = models.BondModel(r0=config.bond_r0, sigma=config.bond_sigma)
        for method in config.methods:
            if method == "prioris":
                continue
            probe = models.bond_tail_probe(model, method)
            print(
                f"tail probe [{method}]: classification={probe.classification}, "
                f"log G_IS(0)={probe.log_gis_0:.4f}, "
                f"log G_IS(-8)={probe.log_gis_neg8:.4f}, "
                f"log G_IS(+8)={probe.log_gis_pos8:.4f}",
                file=out,
            )
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--methods", help="comma list from: prioris,odis,lapis")
    p.add_argument("--family", choices=("gaussian", "student_t"))
    p.add_argument("--nu", type=float, help="degrees of freedom for student_t")
    p.add_argument("--sampler", choices=("mc", "rqmc"))
    p.add_argument("--N", dest="n_grid", help="sample sizes, e.g. 2^7..2^13 or 128,256")
    p.add_argument("--R", dest="replicates", type=int, help="replicates per N")
    p.add_argument("--seed", type=int)
    p.add_argument("--rows", help="dataset slice: 30, 100 or all")
    p.add_argument("--no-standardize", action="store_true", help="keep raw covariates")
    p.add_argument("--data", dest="data_path", help="dataset CSV path")
    p.add_argument("--eta", type=float, help="positivization smoothing weight")
    p.add_argument("--bond-r0", dest="bond_r0", type=float)
    p.add_argument("--bond-sigma", dest="bond_sigma", type=float)
    p.add_argument("--out", dest="outdir", help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        with open(args.config) as fh:
            config = RunConfig.from_text(fh.read())
    updates = {}
    for key in (
        "problem",
        "family",
        "nu",
        "sampler",
        "replicates",
        "seed",
        "data_path",
        "eta",
        "bond_r0",
        "bond_sigma",
        "outdir",
    ):
        value = getattr(args, key, None)
        if value is not None:
            updates[key] = value
    if args.methods:
        updates["methods"] = tuple(m.strip() for m in args.methods.split(","))
    if args.n_grid:
        updates["n_grid"] = tuple(parse_n_grid(args.n_grid))
    if args.rows is not None:
        updates["rows"] = None if args.rows == "all" else int(args.rows)
    if args.no_standardize:
        updates["standardize"] = False
    if args.no_figures:
        updates["figures"] = False
    return replace(config, **updates)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rqmcis",
        description="RQMC importance-sampling experiments for Gaussian integrals",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run an RMSE experiment and write CSV + diagnostics"),
        ("diagnose", "print proposal diagnostics without running estimators"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    try:
        if args.command == "run":
            return run(config)
        return diagnose(config)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
