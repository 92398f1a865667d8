"""Command-line entry point: ``regdgm <subcommand> [options]``.

Exit status is 0 on success, 2 for configuration or input errors, 3 for
numerical failures and 4 for infeasible or degenerate problems.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .energy import EnergyConfig, FeatureExtractor, classifier_accuracy, pretrain_extractor
from .errors import (
    DegenerateInterval,
    DegenerateOptimum,
    InfeasibleAlpha,
    InvalidInput,
    NoFeasibleRoot,
    NumericalError,
    QuadratureUnstable,
)
from .gaussian_tradeoff import (
    SWEEP_HEADER,
    GaussianSpec,
    admissible_beta_interval,
    mse_closed_form,
    optimal_beta,
    sweep,
)
from .metrics import metric_report
from .nonparam import (
    NONPARAM_HEADER,
    SUMMARY_HEADER,
    DensitySpec,
    EnergySpec1D,
    solve_alpha,
    weight_range,
)
from .svgplot import LinePlot
from .toy_data import ToyDataset
from .trainer import TRACE_HEADER, TrainConfig, train_gan

log = logging.getLogger("regdgm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INFEASIBLE = 0, 2, 3, 4

TRAIN_SUMMARY_HEADER = ("lambda", "seed", "step", "mmd2", "frechet", "energy_mean")
METRICS_HEADER = ("n_real", "n_fake", "bandwidth", "mmd2_unbiased", "mmd2_biased", "frechet")
RESOLVED_NAME = "resolved.ini"


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (DegenerateInterval, DegenerateOptimum, NoFeasibleRoot, InfeasibleAlpha)):
        return EXIT_INFEASIBLE
    if isinstance(exc, (NumericalError, QuadratureUnstable, FloatingPointError)):
        return EXIT_NUMERICAL
    if isinstance(exc, InvalidInput):
        return EXIT_CONFIG
    raise exc


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in r])


def _tag(x: float) -> str:
    return f"{x:g}"


def _prepare_out(cfg: ExperimentConfig, out: str | None) -> Path:
    d = Path(out) if out else Path(cfg.get_str("output", "dir"))
    d.mkdir(parents=True, exist_ok=True)
    cfg.set("output", "dir", str(d))
    return d


# gaussian-sweep


def cmd_gaussian_sweep(cfg: ExperimentConfig, out: Path, plot: bool, jobs: int) -> int:
    s = "gaussian"
    try:
        spec = GaussianSpec(
            mu_star=cfg.get_float(s, "mu_star"),
            sigma2=cfg.get_float(s, "sigma2"),
            m=cfg.get_int(s, "m"),
            mu_pre=cfg.get_float(s, "mu_pre"),
        )
    except ConfigError:
        raise
    except InvalidInput as exc:
        raise cfg.error(s, None, str(exc)) from exc
    axis = cfg.get_str(s, "axis")
    grid = cfg.get_floats(s, "grid")
    mc_trials = cfg.get_int(s, "mc_trials")
    seed = cfg.get_int(s, "seed")
    cfg.write(out / RESOLVED_NAME, sections=(s, "output"))

    lo, hi = admissible_beta_interval(spec)
    try:
        rows = sweep(spec, axis, grid, mc_trials=mc_trials, seed=seed)
    except ConfigError:
        raise
    except InvalidInput as exc:
        raise cfg.error(s, None, str(exc)) from exc

    _write_csv(
        out / "gaussian_sweep.csv",
        SWEEP_HEADER,
        [(r.axis_value, r.beta, r.lam, r.mse_reg_cf, r.mse_mle_cf, r.mse_pre_cf, r.mse_reg_mc, r.stderr) for r in rows],
    )
    log.info("admissible beta interval (%.6g, %.6g); wrote %d rows", lo, hi, len(rows))

    if plot:
        x = np.array([r.axis_value for r in rows])
        axis_name = axis.lower().replace("-", "_")
        p = LinePlot(
            title=f"MSE along {axis_name}",
            xlabel={"beta": "beta = lambda / (1 + lambda)", "sample_size": "m", "bias": "mu_pre - mu_star"}[axis_name],
            ylabel="MSE",
            logx=axis_name == "sample_size",
        )
        p.add("REG", x, [r.mse_reg_cf for r in rows])
        p.add("MLE", x, [r.mse_mle_cf for r in rows], dashed=True)
        p.add("PRE", x, [r.mse_pre_cf for r in rows], dashed=True)
        if mc_trials:
            p.add("REG (MC)", x, [r.mse_reg_mc for r in rows])
        if axis_name == "beta":
            p.mark(lo, mse_closed_form(spec, lo).mse_reg, f"lo={lo:.3g}")
            p.mark(hi, mse_closed_form(spec, hi).mse_reg, f"hi={hi:.3g}")
            b_opt, _, mse_min = optimal_beta(spec)
            p.mark(b_opt, mse_min, f"opt={b_opt:.3g}", color="#2ca02c")
        p.save(out / "gaussian_sweep.svg")
    return EXIT_OK


# nonparam


@dataclass
class _SolveOutcome:
    divergence: str
    lam: float
    result: object = None
    error: BaseException | None = None


def _nonparam_problem(cfg: ExperimentConfig):
    s = "nonparam"
    support = cfg.get_floats(s, "support")
    if len(support) != 2 or not support[0] < support[1]:
        raise cfg.error(s, "support", "expected two increasing numbers a, b")
    support = (support[0], support[1])
    try:
        spec = DensitySpec.uniform(*support, quad_nodes=cfg.get_int(s, "quad_nodes"))
        kind = cfg.get_str(s, "energy").lower()
        if kind == "linear":
            energy = EnergySpec1D.linear(cfg.get_float(s, "slope"), cfg.get_float(s, "intercept"), support)
        elif kind == "tabulated":
            energy = EnergySpec1D.tabulated(cfg.get_floats(s, "energy_x"), cfg.get_floats(s, "energy_values"))
        else:
            raise cfg.error(s, "energy", f"expected 'linear' or 'tabulated', got {kind!r}")
        energy.check(support)
    except ConfigError:
        raise
    except InvalidInput as exc:
        raise cfg.error(s, None, str(exc)) from exc
    return spec, energy


def cmd_nonparam(cfg: ExperimentConfig, out: Path, plot: bool, jobs: int) -> int:
    s = "nonparam"
    spec, energy = _nonparam_problem(cfg)
    lams = cfg.get_floats(s, "lambdas")
    divs = [d.upper() for d in cfg.get_strs(s, "divergences")]
    for d in divs:
        if d not in ("KL", "JS"):
            raise cfg.error(s, "divergences", f"unknown divergence {d!r}")
    for lam in lams:
        if not (lam > 0 and math.isfinite(lam)):
            raise cfg.error(s, "lambdas", f"lambda must be positive and finite, got {lam}")
    grid_points = cfg.get_int(s, "grid_points")
    if grid_points < 2:
        raise cfg.error(s, "grid_points", "need at least 2 points")
    tol = cfg.get_float(s, "tol")
    cfg.write(out / RESOLVED_NAME, sections=(s, "output"))

    def solve(job):
        div, lam = job
        try:
            return _SolveOutcome(div, lam, solve_alpha(spec, energy, div, lam, tol=tol, grid_points=grid_points))
        except (NoFeasibleRoot, QuadratureUnstable, InfeasibleAlpha) as exc:
            return _SolveOutcome(div, lam, error=exc)

    jobs_list = [(d, lam) for d in divs for lam in lams]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(solve, jobs_list))

    summary, status = [], EXIT_OK
    for o in outcomes:
        if o.error is not None:
            log.error("%s lambda=%s: %s: %s", o.divergence, _tag(o.lam), type(o.error).__name__, o.error)
            summary.append((o.divergence, o.lam, "", ""))
            status = max(status, exit_code(o.error))
            continue
        r = o.result
        _write_csv(out / f"nonparam_{r.divergence}_lam{_tag(r.lam)}.csv", NONPARAM_HEADER, r.rows())
        lo, hi, ratio = weight_range(r)
        log.info("%s lambda=%s: alpha*=%.12g, weight range [%.6g, %.6g], ratio %.6g",
                 r.divergence, _tag(r.lam), r.alpha_star, lo, hi, ratio)
        summary.append((r.divergence, r.lam, r.alpha_star, r.residual))
    _write_csv(out / "nonparam_summary.csv", SUMMARY_HEADER, summary)

    if plot:
        for d in divs:
            done = [o.result for o in outcomes if o.divergence == d and o.result is not None]
            if not done:
                continue
            p = LinePlot(title=f"{d}: data density and optimal density", xlabel="x", ylabel="density")
            p.add("p_d", done[0].x, done[0].p_d, dashed=True)
            for r in done:
                p.add(f"p_g*  lambda={_tag(r.lam)}", r.x, r.p_g_star)
            p.save(out / f"nonparam_{d}.svg")
    return status


# train


def _train_one(args):
    data_args, tcfg, extractor = args
    return train_gan(ToyDataset(*data_args), tcfg, extractor)


def _train_configs(cfg: ExperimentConfig):
    s = "train"
    lams = cfg.get_floats(s, "lambda")
    seeds = cfg.get_ints(s, "seeds")
    if not seeds:
        raise cfg.error(s, "seeds", "at least one seed is required")
    try:
        energy = EnergyConfig(
            kind=cfg.get_str(s, "energy_kind"),
            n_mc=cfg.get_int(s, "n_mc"),
            entropy_sign=cfg.get_int(s, "entropy_sign"),
        )
        base = dict(
            latent_dim=cfg.get_int(s, "latent_dim"),
            g_hidden=tuple(cfg.get_ints(s, "g_hidden")),
            d_hidden=tuple(cfg.get_ints(s, "d_hidden")),
            g_lr=cfg.get_float(s, "g_lr"),
            d_lr=cfg.get_float(s, "d_lr"),
            beta1=cfg.get_float(s, "beta1"),
            beta2=cfg.get_float(s, "beta2"),
            batch_size=cfg.get_int(s, "batch_size"),
            steps=cfg.get_int(s, "steps"),
            energy=energy,
            extractor_path=cfg.get_str(s, "extractor_path") or None,
            eval_every=cfg.get_int(s, "eval_every"),
            n_eval=cfg.get_int(s, "n_eval"),
        )
        runs = [TrainConfig(lam=lam, seed=seed, **base) for lam in lams for seed in seeds]
        family = cfg.get_str(s, "family")
        full_size, limited_m = cfg.get_int(s, "full_size"), cfg.get_int(s, "limited_m")
        ToyDataset(family, full_size, limited_m, 0)
    except ConfigError:
        raise
    except InvalidInput as exc:
        raise cfg.error(s, None, str(exc)) from exc
    return runs, (family, full_size, limited_m)


def cmd_train(cfg: ExperimentConfig, out: Path, plot: bool, jobs: int) -> int:
    s = "train"
    path = cfg.get_str(s, "extractor_path")
    if path and cfg.path and not Path(path).is_absolute():
        # relative paths are taken relative to the config file
        cfg.set(s, "extractor_path", str((Path(cfg.path).parent / path).resolve()))
    runs, (family, full_size, limited_m) = _train_configs(cfg)
    cfg.write(out / RESOLVED_NAME, sections=(s, "output"))

    extractor = None
    if any(r.lam > 0 for r in runs):
        if not runs[0].extractor_path:
            raise cfg.error(s, "extractor_path", "lambda > 0 requires an extractor file")
        p = Path(runs[0].extractor_path)
        if not p.exists():
            raise cfg.error(s, "extractor_path", f"extractor file {p} does not exist")
        extractor = FeatureExtractor.load(p)

    work = [((family, full_size, limited_m, r.seed), r, extractor if r.lam > 0 else None) for r in runs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_train_one, work))
    else:
        traces = [_train_one(w) for w in work]

    summary = []
    for tr in traces:
        c = tr.config
        name = f"lam{_tag(c.lam)}_seed{c.seed}"
        tr.write_csv(out / f"trace_{name}.csv")
        tr.save_checkpoints(out, prefix=f"{name}_")
        f = tr.final
        summary.append((c.lam, c.seed, f.step, f.mmd2, f.frechet, f.energy_mean))
        log.info("lambda=%s seed=%d: final mmd2=%.6g frechet=%.6g", _tag(c.lam), c.seed, f.mmd2, f.frechet)
    _write_csv(out / "train_summary.csv", TRAIN_SUMMARY_HEADER, summary)

    if plot:
        p = LinePlot(title="MMD^2 during training", xlabel="step", ylabel="mmd2")
        for tr in traces:
            c = tr.config
            p.add(f"lambda={_tag(c.lam)} seed={c.seed}", [r.step for r in tr.rows], [r.mmd2 for r in tr.rows])
        p.save(out / "train_mmd2.svg")
    return EXIT_OK


# metrics and extractor


def read_points(path) -> np.ndarray:
    """Read a CSV of 2-D points; a non-numeric first line is taken as a header."""
    p = Path(path)
    try:
        lines = [ln for ln in p.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise InvalidInput(f"cannot read {p}: {exc.strerror}") from exc
    rows = []
    for no, line in enumerate(lines, start=1):
        try:
            rows.append([float(t) for t in line.split(",")])
        except ValueError:
            if no == 1:
                continue
            raise InvalidInput(f"{p}:{no}: not a row of numbers: {line!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidInput(f"{p}: expected a nonempty table with a fixed number of columns")
    return np.array(rows)


def cmd_metrics(args) -> int:
    real, fake = read_points(args.real), read_points(args.fake)
    r = metric_report(real, fake, bandwidth=args.bandwidth)
    row = (r.n_real, r.n_fake, r.bandwidth, r.mmd2_unbiased, r.mmd2_biased, r.frechet)
    print(",".join(METRICS_HEADER))
    print(",".join(_num(v) for v in row))
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        _write_csv(d / "metrics.csv", METRICS_HEADER, [row])
    return EXIT_OK


def cmd_extractor(args) -> int:
    d = Path(args.out or ".")
    d.mkdir(parents=True, exist_ok=True)
    f = pretrain_extractor(args.family, steps=args.steps, seed=args.seed or 0)
    data = ToyDataset(args.family, 2000, 64, seed=args.seed or 0)
    path = d / "extractor.txt"
    f.save(path)
    log.info("wrote %s (accuracy on target data %.4f)", path, classifier_accuracy(f, data.full, data.labels))
    print(path)
    return EXIT_OK


CONFIG_COMMANDS = {
    "gaussian-sweep": cmd_gaussian_sweep,
    "nonparam": cmd_nonparam,
    "train": cmd_train,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regdgm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI experiment config (defaults are used when omitted)")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--seed", type=int, help="override the seed(s) in the config")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")

    common(sub.add_parser("gaussian-sweep", help="closed-form and Monte-Carlo MSE sweep"))
    common(sub.add_parser("nonparam", help="solve for the optimal density per divergence and lambda"))
    common(sub.add_parser("train", help="train (regularized) GANs on a 2-D toy mixture"))

    m = sub.add_parser("metrics", help="MMD^2 and Frechet distance between two point CSVs")
    m.add_argument("real")
    m.add_argument("fake")
    m.add_argument("--bandwidth", type=float, help="RBF bandwidth (median heuristic when omitted)")
    m.add_argument("--out", help="also write metrics.csv into this directory")

    e = sub.add_parser("extractor", help="pretrain a frozen feature extractor and save it")
    e.add_argument("--family", default="ring8")
    e.add_argument("--steps", type=int, default=1500)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", help="output directory")
    return parser


def run(args) -> int:
    if args.command == "metrics":
        return cmd_metrics(args)
    if args.command == "extractor":
        return cmd_extractor(args)
    if args.jobs < 1:
        raise InvalidInput("--jobs must be at least 1")
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.set("gaussian", "seed", args.seed)
        cfg.set("train", "seeds", args.seed)
    plot = args.plot or cfg.get_bool("output", "plot")
    out = _prepare_out(cfg, args.out)
    return CONFIG_COMMANDS[args.command](cfg, out, plot, args.jobs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return run(args)
    except (InvalidInput, NumericalError, QuadratureUnstable, DegenerateInterval,
            DegenerateOptimum, NoFeasibleRoot, InfeasibleAlpha) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
