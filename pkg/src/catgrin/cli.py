"""Command-line front end.

Subcommands:

    analyze       weak values, normalization, moments, interference indicator
    sample        Monte Carlo trials (CSV) plus the signed-product estimate
    oracle-check  grid oracle vs analytic engine on the configured run
    sweep         one parameter swept over a list of values, CSV table

All take --config PATH (TOML or JSON) and --out DIR.  Exit codes:
0 success, 2 configuration error, 3 the post-selection never succeeds,
4 oracle mismatch.  CHESHIRE_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cheshire as cheshire_mod
from . import config as config_mod
from . import oracle as oracle_mod
from . import sampler as sampler_mod
from . import statistics as stats_mod
from .errors import (
    CatgrinError,
    ConfigError,
    OrthogonalStatesError,
    ZeroPostSelectionError,
)
from .meters import classify_regime
from .weakvalues import matrix_elements

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ZERO_POSTSELECTION = 3
EXIT_ORACLE_MISMATCH = 4

ORACLE_RESIDUAL_LIMIT = 1e-6


def _cnum(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _meter_block(meter) -> dict:
    regime = classify_regime(meter)
    return {
        "epsilon": meter.epsilon,
        "epsilon_tilde": meter.epsilon_tilde,
        "w": meter.w,
        "regime": regime.label,
        "crossover": regime.crossover,
    }


def _is_identity_povm(e_f) -> bool:
    m = e_f.entries
    t = float(np.trace(m).real) / 4.0
    return t > 0 and float(np.max(np.abs(m - t * np.eye(4)))) <= 1e-12 * max(t, 1.0)


def _moment_block(rep: stats_mod.MomentReport) -> dict:
    return {
        "mean_x": rep.mean_x,
        "mean_y": rep.mean_y,
        "cross_xy": rep.cross_xy,
        "cross_xy2": rep.cross_xy2,
        "norm_N": rep.norm_N,
        "p_postselect": rep.p_postselect,
    }


def build_report(exp, sampler_cfg, couplings=None) -> dict:
    """Full analytic report for one experiment."""
    rep = stats_mod.moments(exp)
    chesh = cheshire_mod.cheshire_parameter(exp)
    meters = {"x": _meter_block(exp.meter_x), "y": _meter_block(exp.meter_y)}
    for name in ("x", "y"):
        if couplings and couplings.get(name) is not None:
            meters[name]["coupling"] = couplings[name]
    report = {
        "config": config_mod.echo_config(exp, sampler_cfg, couplings),
        "meters": meters,
        "moments": _moment_block(rep),
        "cheshire": {
            "c_of_Ef": chesh.c_of_Ef,
            "c_total": chesh.c_total,
            "c_moment_form": chesh.c_moment_form,
            "cross_xy": chesh.cross_xy,
            "p_postselect": chesh.p_postselect,
        },
        "notes": [],
    }
    try:
        wv = exp.weak_values
        report["weak_values"] = {
            "L_w": _cnum(wv.L_w),
            "R_w": _cnum(wv.R_w),
            "Sigma_w": _cnum(wv.Sigma_w),
            "M_w": _cnum(wv.M_w),
            "N_w": _cnum(wv.N_w),
            "Q_w": _cnum(wv.Q_w),
            "L_2w": wv.L_2w,
            "R_2w": wv.R_2w,
            "Sigma_2w": wv.Sigma_2w,
            "trace": wv.trace,
        }
    except OrthogonalStatesError:
        report["weak_values"] = None
        report["notes"].append(
            "preparation and post-selection are orthogonal: normalized weak "
            "values diverge; see matrix_elements"
        )
        try:
            psi = stats_mod._pure_from_rank1(exp.rho_i, "rho_i")
            phi = stats_mod._pure_from_rank1(exp.e_f, "E_f")
            me = matrix_elements(psi, phi, exp.axis)
            report["matrix_elements"] = {
                "l_w": _cnum(me.l_w),
                "sigma_w": _cnum(me.sigma_w),
                "overlap": _cnum(me.overlap),
            }
        except CatgrinError:
            pass
    if _is_identity_povm(exp.e_f):
        report["notes"].append(
            "E_f is proportional to the identity: no post-selection, so no "
            "Cheshire cat (C = 0)"
        )
    if sampler_cfg is not None and sampler_cfg.noise is not None:
        diag = cheshire_mod.noise_check(
            chesh, sampler_cfg.noise[0], sampler_cfg.noise[1], exp.w_x, exp.w_y
        )
        report["cheshire"]["noise_ok"] = chesh.with_noise(diag).noise_ok
        report["cheshire"]["noise"] = {
            "passed": diag.passed,
            "product_ratio": diag.product_ratio,
            "ratio_x": diag.ratio_x,
            "ratio_y": diag.ratio_y,
            "margin": diag.margin,
        }
    return report


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _write_report_csv(report: dict, path: Path) -> None:
    rows = ["section,key,value"]

    def emit(section: str, mapping: dict):
        for key, val in mapping.items():
            rows.append(f"{section},{key},{json.dumps(val, default=_json_default)}")

    for section in ("weak_values", "moments", "cheshire", "meters"):
        block = report.get(section)
        if isinstance(block, dict):
            emit(section, block)
    path.write_text("\n".join(rows) + "\n")


def cmd_analyze(args) -> int:
    raw = config_mod.load_config(args.config)
    exp, sampler_cfg = config_mod.build_experiment(raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = build_report(exp, sampler_cfg, config_mod.coupling_metadata(raw))
    if args.format == "csv":
        _write_report_csv(report, out / "report.csv")
    _write_json(report, out / "report.json")
    if args.density_grid:
        n = int(args.density_grid)
        half_x = 8.0 * exp.meter_x.spread + 2.0
        half_y = 8.0 * exp.meter_y.spread + 2.0
        xs = np.linspace(-half_x, half_x, n)
        ys = np.linspace(-half_y, half_y, n)
        dens = stats_mod.joint_density(exp, xs[:, None], ys[None, :])
        table = np.column_stack(
            [np.repeat(xs, n), np.tile(ys, n), dens.reshape(-1)]
        )
        np.savetxt(
            out / "density.csv",
            table,
            delimiter=",",
            header="x,y,density",
            comments="",
            fmt=["%.8g", "%.8g", "%.17g"],
        )
    print(json.dumps(report["moments"], default=_json_default))
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK


def cmd_sample(args) -> int:
    exp, sampler_cfg = config_mod.build_experiment(config_mod.load_config(args.config))
    if args.trials is not None or args.seed is not None:
        base = sampler_cfg or sampler_mod.SamplerConfig(n_trials=1, seed=0)
        sampler_cfg = sampler_mod.SamplerConfig(
            n_trials=args.trials if args.trials is not None else base.n_trials,
            seed=args.seed if args.seed is not None else base.seed,
            noise=base.noise,
        )
    if sampler_cfg is None:
        raise ConfigError("sampler: section missing (or pass --trials/--seed)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = sampler_mod.sample_trials(exp, sampler_cfg)
    sampler_mod.write_trials_csv(table, out / "trials.csv")
    estimate, std_error = sampler_mod.estimate_cheshire(table)
    chesh = cheshire_mod.cheshire_parameter(exp)
    summary = {
        "n_trials": sampler_cfg.n_trials,
        "seed": sampler_cfg.seed,
        "estimate": estimate,
        "std_error": std_error,
        "expected_c_total": chesh.c_total,
        "success_fraction": float(np.mean(table.postselected)),
        "p_postselect": chesh.p_postselect,
        "metadata": table.metadata,
    }
    if sampler_cfg.noise is not None:
        diag = cheshire_mod.noise_check(
            chesh, sampler_cfg.noise[0], sampler_cfg.noise[1], exp.w_x, exp.w_y
        )
        summary["noise_check"] = {
            "passed": diag.passed,
            "product_ratio": diag.product_ratio,
            "ratio_x": diag.ratio_x,
            "ratio_y": diag.ratio_y,
        }
    _write_json(summary, out / "summary.json")
    print(
        f"estimate = {estimate:.6g} +- {std_error:.2g} "
        f"(expected {chesh.c_total:.6g}); trials in {out / 'trials.csv'}"
    )
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    exp, _ = config_mod.build_experiment(config_mod.load_config(args.config))
    spacing = float(args.spacing)
    meter_x = oracle_mod.GriddedMeter.from_gaussian(exp.meter_x, spacing=spacing)
    meter_y = oracle_mod.GriddedMeter.from_gaussian(exp.meter_y, spacing=spacing)
    gj = oracle_mod.brute_force_joint(exp.rho_i, exp.e_f, exp.axis, meter_x, meter_y)
    p = stats_mod.postselection_probability(exp)
    engine = p * stats_mod.joint_density(
        exp, gj.nodes_x[:, None], gj.nodes_y[None, :]
    )
    residual = float(np.max(np.abs(engine - gj.selected)))
    passed = residual <= ORACLE_RESIDUAL_LIMIT
    verdict = {
        "residual": residual,
        "limit": ORACLE_RESIDUAL_LIMIT,
        "passed": passed,
        "grid_spacing": spacing,
        "branch_mass": gj.mass("selected"),
        "p_postselect": p,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(verdict, out / "oracle.json")
    if args.dump_grid:
        oracle_mod.joint_to_csv(gj, out / "oracle_grid.csv")
    print(f"oracle residual {residual:.3g} ({'pass' if passed else 'FAIL'})")
    return EXIT_OK if passed else EXIT_ORACLE_MISMATCH


def _sweep_rows(raw_cfg: dict, paths: list[str], values: list):
    def one(value):
        cfg = copy.deepcopy(raw_cfg)
        for p in paths:
            config_mod.set_by_path(cfg, p, value)
        exp, _ = config_mod.build_experiment(cfg)
        rep = stats_mod.moments(exp)
        chesh = cheshire_mod.cheshire_parameter(exp)
        return {
            "value": value,
            "w_x": exp.w_x,
            "w_y": exp.w_y,
            "norm_N": rep.norm_N,
            "p_postselect": rep.p_postselect,
            "mean_x": rep.mean_x,
            "mean_y": rep.mean_y,
            "cross_xy": rep.cross_xy,
            "cross_xy2": rep.cross_xy2,
            "c_of_Ef": chesh.c_of_Ef,
            "c_total": chesh.c_total,
        }

    workers = sampler_mod.thread_count()
    if workers > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]


def cmd_sweep(args) -> int:
    raw_cfg = config_mod.load_config(args.config)
    paths = [p.strip() for p in args.param.split(",") if p.strip()]
    if not paths:
        raise ConfigError("sweep: --param needs at least one dotted path")
    try:
        values = json.loads(args.values)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sweep: --values is not valid JSON: {exc}") from exc
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep: --values must be a nonempty JSON list")
    rows = _sweep_rows(raw_cfg, paths, values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        cells = []
        for col in cols:
            v = row[col]
            cells.append(json.dumps(v) if isinstance(v, list) else repr(v))
        lines.append(",".join(cells))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"{len(rows)} sweep rows written to {out / 'sweep.csv'}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catgrin",
        description=(
            "Post-selected double-meter statistics: analytic reports, Monte "
            "Carlo trials, grid-oracle checks, and parameter sweeps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML or JSON run config")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("analyze", help="analytic report for one experiment")
    common(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument(
        "--density-grid",
        type=int,
        default=0,
        help="also write the conditional density on an N x N grid",
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sample", help="Monte Carlo trials and estimator summary")
    common(p)
    p.add_argument("--trials", type=int, default=None, help="override sampler.n_trials")
    p.add_argument("--seed", type=int, default=None, help="override sampler.seed")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("oracle-check", help="grid oracle vs analytic engine")
    common(p)
    p.add_argument("--spacing", type=float, default=oracle_mod.DEFAULT_SPACING)
    p.add_argument("--dump-grid", action="store_true", help="also write oracle_grid.csv")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("sweep", help="sweep one config parameter over values")
    common(p)
    p.add_argument(
        "--param",
        required=True,
        help="dotted config path(s), comma separated, e.g. meters.x.epsilon_tilde",
    )
    p.add_argument(
        "--values", required=True, help="JSON list of values, e.g. '[0.1, 0.5, 1.0]'"
    )
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ZeroPostSelectionError as exc:
        print(f"zero post-selection: {exc}", file=sys.stderr)
        return EXIT_ZERO_POSTSELECTION
    except CatgrinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
