"""Command-line driver.

Subcommands write delimited outputs (CSV/JSON, optional binary kernels) and
PNG figures into ``--out``. Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 I/O error.
"""

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import io, plotting
from .baseline import fit_rbf, rbf_posterior
from .errors import AliasingViolation, DivergedLoss, RNFFError
from .experiments import (
    ablation,
    approximate,
    default_grid,
    default_mode,
    exact_posterior,
    locations,
    mean_relative_error,
    synthetic_dataset,
    SyntheticData,
)
from .features import MODES, kernel_matrix, relative_error
from .kernels import gram
from .learn import (
    LearningProblem,
    build_cache,
    load_model,
    model_to_dict,
    posterior_predict,
    train,
)
from .optim import TrainConfig
from .simulate import simulate_paths
from .spectral import (
    FrequencyGrid,
    LocallyStationary,
    build_spectral_matrix,
    default_hmk,
    load_density,
    validate_aliasing,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class InputFileError(Exception):
    """Unreadable or malformed input file."""


def _float_list(text):
    text = str(text).strip()
    if not text:
        return []
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in _float_list(text)]


def _add_common(p):
    p.add_argument("--config", help="JSON file with flag values; flags given here override it")
    p.add_argument("--out", default="rnff_out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")


def _add_kernel(p):
    p.add_argument("--kernel", choices=("ls", "hmk"), help="closed-form kernel")
    p.add_argument("--density", help="JSON spectral density config (overrides --kernel)")
    p.add_argument("--a", type=float, default=1.0, help="locally stationary parameter")
    p.add_argument("--m", type=int, help="number of features")
    p.add_argument("--omega-max", type=float, help="cutoff frequency")
    p.add_argument("--grid", choices=("auto", "nonneg", "symmetric"), default="auto")
    p.add_argument("--mode", choices=("auto",) + MODES, default="auto")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--n", type=int, help="number of locations")
    p.add_argument("--dx", type=float, help="location spacing")
    p.add_argument("--centered", action="store_true",
                   help="x_i = i dx for i = -(n-1)/2..(n-1)/2 instead of 0..n-1")
    p.add_argument("--strict-aliasing", action="store_true",
                   help="treat aliasing violations as errors")


def build_parser():
    parser = argparse.ArgumentParser(prog="rnff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approximate", help="low-rank approximation of a closed-form kernel")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--format", choices=("csv", "bin", "both"), default="csv")

    p = sub.add_parser("ablate", help="relative error sweeps over m and omega_max")
    _add_common(p)
    p.add_argument("--ms", type=_int_list, default=[20, 40, 80, 160, 320])
    p.add_argument("--omega-maxes", type=_float_list, default=[4, 5, 6, 8, 10, 12])
    p.add_argument("--ns", type=_int_list, default=[1000, 2000])
    p.add_argument("--fixed-omega-max", type=float, default=5.0)
    p.add_argument("--fixed-m", type=int, default=100)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--dx", type=float, default=1e-3)

    p = sub.add_parser("simulate", help="sample paths of the approximated process")
    _add_common(p)
    _add_kernel(p)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--validate", action="store_true",
                   help="check the empirical covariance of 1e5 paths at 5 locations")
    p.add_argument("--validate-paths", type=int, default=100_000)

    p = sub.add_parser("synth", help="synthetic training data from the locally stationary GP")
    _add_common(p)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--noise-std", type=float, default=1e-2)
    p.add_argument("--x-min", type=float, default=-5.0)
    p.add_argument("--x-max", type=float, default=5.0)

    p = sub.add_parser("learn", help="learn a factorized spectral density from data")
    _add_common(p)
    p.add_argument("--data", help="training CSV with columns x,z")
    p.add_argument("--r", type=int, default=8)
    p.add_argument("--m", type=int, default=255)
    p.add_argument("--omega-max", type=float, default=10.0)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--iterations", type=int, default=4000)
    p.add_argument("--hidden", type=_int_list, default=[128, 128])
    p.add_argument("--input-scale", type=float, default=None,
                   help="network input scaling (default 1/omega_max)")
    p.add_argument("--complex-f", action="store_true", help="use complex network outputs")

    p = sub.add_parser("predict", help="posterior prediction with a trained model")
    _add_common(p)
    p.add_argument("--model", help="trained model JSON")
    p.add_argument("--test", help="CSV with column x; otherwise a uniform grid")
    p.add_argument("--t", type=int, default=100)
    p.add_argument("--x-min", type=float, default=-10.0)
    p.add_argument("--x-max", type=float, default=10.0)
    p.add_argument("--compare-exact", action="store_true",
                   help="also write the exact locally stationary posterior")
    p.add_argument("--data", help="training CSV (needed for --compare-exact / --baseline-rbf)")
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--noise-std", type=float, default=1e-2)
    p.add_argument("--baseline-rbf", action="store_true",
                   help="fit an RBF baseline on --data and report its error")
    return parser, sub


REQUIRED = {
    "approximate": ("m", "omega_max", "n", "dx"),
    "simulate": (),
    "learn": ("data",),
    "predict": ("model",),
}

SIM_DEFAULTS = {
    "ls": {"m": 20, "omega_max": 5.0, "n": 2500, "dx": 1e-3, "centered": False},
    "hmk": {"m": 100, "omega_max": 20.0, "n": 599, "dx": 1e-2, "centered": True},
}


def parse_args(argv):
    parser, sub = build_parser()
    args = parser.parse_args(argv)
    subparser = sub.choices[args.command]
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            subparser.error(f"cannot read config {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            subparser.error(f"invalid config {args.config}: {exc}")
        cfg = {k.lstrip("-").replace("-", "_"): v for k, v in cfg.items()}
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            subparser.error(f"unknown config keys: {', '.join(unknown)}")
        for key, value in cfg.items():
            action = next(a for a in subparser._actions if a.dest == key)
            if isinstance(value, list) and action.type in (_float_list, _int_list):
                cfg[key] = action.type(",".join(str(v) for v in value))
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k, None) is None]
    if args.command in ("approximate", "simulate") and not (args.kernel or args.density):
        missing.append("kernel")
    if missing:
        subparser.error("missing required option(s): "
                        + ", ".join("--" + k.replace("_", "-") for k in missing))
    return args, subparser


def _model(args):
    if args.density:
        try:
            return load_density(args.density)
        except OSError as exc:
            raise InputFileError(f"cannot read density {args.density}: {exc}") from exc
    if args.kernel == "ls":
        return LocallyStationary(args.a)
    return default_hmk(args.a)


def _grid_and_mode(args, model):
    if args.grid == "auto":
        grid = default_grid(model, args.m, args.omega_max)
    else:
        grid = FrequencyGrid(args.omega_max, args.m, args.grid == "symmetric")
    mode = default_mode(model, grid) if args.mode == "auto" else args.mode
    return grid, mode


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_approximate(args):
    model = _model(args)
    grid, mode = _grid_and_mode(args, model)
    xs = locations(args.n, args.dx, args.centered)
    factor, lr = approximate(model, grid, xs, mode, args.jitter, args.strict_aliasing)
    K_hat = kernel_matrix(lr)
    if np.iscomplexobj(K_hat):
        raise RNFFError("low-rank kernel is complex; choose a real-kernel density")
    K = gram(model, xs)
    err = np.abs(K_hat - K)
    out = _outdir(args.out)
    summary = approximation_summary(K, K_hat)
    summary.update({
        "m": grid.m,
        "omega_max": grid.omega_max,
        "delta_omega": grid.delta_omega,
        "aliasing_ok": validate_aliasing(grid, float(np.abs(xs).max(initial=0.0))),
        "n": int(xs.size),
        "mode": mode,
        "rank": int(factor.rank),
        "symmetric_grid": grid.symmetric,
    })
    for name, M in (("kernel_exact", K), ("kernel_lowrank", K_hat), ("abs_error", err)):
        if args.format in ("csv", "both"):
            io.write_kernel_csv(os.path.join(out, name + ".csv"), M, xs)
        if args.format in ("bin", "both"):
            io.write_kernel_bin(os.path.join(out, name + ".bin"), M)
    io.write_json(os.path.join(out, "summary.json"), summary)
    if not args.no_plots:
        plotting.kernel_panels(os.path.join(out, "kernel.png"), xs, K, K_hat)
        plotting.spectral_panels(os.path.join(out, "spectral.png"), grid.frequencies,
                                 build_spectral_matrix(grid, model))
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def approximation_summary(K_exact, K_hat):
    return {
        "max_abs_error": float(np.abs(K_hat - K_exact).max(initial=0.0)),
        "rel_rsse": relative_error(K_hat, K_exact),
    }


def cmd_ablate(args):
    for name in ("ms", "omega_maxes", "ns"):
        if not getattr(args, name):
            raise ValueError(f"--{name.replace('_', '-')} must not be empty")
    rows = ablation(args.ms, args.omega_maxes, args.ns, args.fixed_omega_max,
                    args.fixed_m, args.a, args.dx)
    out = _outdir(args.out)
    io.write_columns(os.path.join(out, "ablation.csv"),
                     ("sweep_var", "n", "value", "rel_rsse"), list(zip(*rows)))
    if not args.no_plots:
        plotting.ablation_figure(os.path.join(out, "ablation.png"), rows)
    for row in rows:
        print(",".join(io._cell(v) for v in row))
    return EXIT_OK


def _fill_sim_defaults(args):
    base = SIM_DEFAULTS["hmk" if args.kernel == "hmk" else "ls"]
    for key, value in base.items():
        if key == "centered":
            continue
        if getattr(args, key) is None:
            setattr(args, key, value)
    if args.n is not None and args.kernel == "hmk" and not args.centered and args.dx == base["dx"]:
        args.centered = True


def cmd_simulate(args):
    if args.paths < 0:
        raise ValueError("--paths must be nonnegative")
    _fill_sim_defaults(args)
    model = _model(args)
    grid, mode = _grid_and_mode(args, model)
    xs = locations(args.n, args.dx, args.centered)
    factor, lr = approximate(model, grid, xs, mode, args.jitter, args.strict_aliasing)
    Z = simulate_paths(factor, xs, args.paths, args.seed, args.strict_aliasing)
    out = _outdir(args.out)
    ids = np.repeat(np.arange(args.paths), xs.size)
    xcol = np.tile(xs, args.paths)
    zflat = Z.ravel()
    if np.iscomplexobj(Z):
        io.write_columns(os.path.join(out, "paths.csv"), ("path_id", "x", "z", "z_im"),
                         [ids, xcol, zflat.real, zflat.imag])
    else:
        io.write_columns(os.path.join(out, "paths.csv"), ("path_id", "x", "z"),
                         [ids, xcol, zflat])
    if not args.no_plots and args.paths:
        plotting.paths_figure(os.path.join(out, "paths.png"), xs, Z)
    if args.validate:
        report = validate_simulation(factor, xs, args.validate_paths, args.seed + 1)
        io.write_json(os.path.join(out, "validation.json"), report)
        print(json.dumps(report, sort_keys=True))
        if not report["passed"]:
            return EXIT_NUMERIC
    return EXIT_OK


def validate_simulation(factor, xs, n_paths, seed, n_locations=5):
    """Empirical covariance of many paths against the low-rank kernel.

    Each entry must lie within 4 Monte Carlo standard errors; the standard
    error of a zero-mean product estimate is ``sqrt((K_ii K_jj + K_ij^2) / N)``.
    """
    from .features import build_feature_matrix  # local: keeps the import list short

    idx = np.unique(np.linspace(0, xs.size - 1, min(n_locations, xs.size)).astype(int))
    pts = xs[idx]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingViolation)
        K = kernel_matrix(build_feature_matrix(pts, factor))
        Z = simulate_paths(factor, pts, n_paths, seed)
    if np.iscomplexobj(Z):
        emp = (Z.T @ Z.conj()) / n_paths
        se = np.sqrt(np.outer(np.diag(K).real, np.diag(K).real) / n_paths)
    else:
        emp = (Z.T @ Z) / n_paths
        se = np.sqrt((np.outer(np.diag(K), np.diag(K)) + K**2) / n_paths)
    ratio = np.abs(emp - K) / np.maximum(se, 1e-300)
    return {
        "locations": pts.tolist(),
        "paths": int(n_paths),
        "max_se_ratio": float(ratio.max()),
        "passed": bool(ratio.max() <= 4.0),
    }


def _read_training(path):
    try:
        cols = io.read_columns(path, ("x", "z"))
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputFileError(str(exc)) from exc
    if cols["x"].size == 0:
        raise InputFileError(f"{path}: no data rows")
    return cols["x"], cols["z"]


def cmd_synth(args):
    data = synthetic_dataset(args.seed, args.a, args.n, args.noise_std, (args.x_min, args.x_max))
    out = _outdir(args.out)
    io.write_columns(os.path.join(out, "train.csv"), ("x", "z"), [data.xs, data.z])
    io.write_columns(os.path.join(out, "truth.csv"), ("x", "f"), [data.xs, data.f])
    return EXIT_OK


def cmd_learn(args):
    xs, z = _read_training(args.data)
    grid = FrequencyGrid(args.omega_max, args.m, symmetric=True)
    config = TrainConfig(learning_rate=args.lr, iterations=args.iterations, seed=args.seed)
    try:
        result = train(xs, z, grid, args.r, config, hidden=tuple(args.hidden),
                       complex_f=args.complex_f, input_scale=args.input_scale)
    except DivergedLoss as exc:
        print(f"error: training diverged at iteration {exc.iteration}", file=sys.stderr)
        return EXIT_NUMERIC
    out = _outdir(args.out)
    io.write_json(os.path.join(out, "model.json"),
                  model_to_dict(result.params, grid, result.cache))
    io.write_columns(os.path.join(out, "loss.csv"), ("iteration", "nll"),
                     [np.arange(result.history.size), result.history])
    summary = {
        "final_nll": float(result.history[-1]),
        "initial_nll": float(result.history[0]),
        "seed": args.seed,
        "iterations": args.iterations,
        "sigma_noise2": result.params.sigma_noise2,
        "gamma2": result.params.gamma2,
    }
    io.write_json(os.path.join(out, "summary.json"), summary)
    if not args.no_plots:
        plotting.loss_figure(os.path.join(out, "loss.png"), result.history)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_predict(args):
    try:
        params, grid, cache = load_model(args.model)
    except OSError as exc:
        raise InputFileError(f"cannot read model {args.model}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise InputFileError(f"{args.model}: malformed model file ({exc})") from exc
    if args.test:
        try:
            xs_test = io.read_columns(args.test, ("x",))["x"]
        except OSError as exc:
            raise InputFileError(f"cannot read {args.test}: {exc}") from exc
        except ValueError as exc:
            raise InputFileError(str(exc)) from exc
    else:
        xs_test = np.linspace(args.x_min, args.x_max, args.t)
    needs_data = args.compare_exact or args.baseline_rbf
    if needs_data and not args.data:
        raise ValueError("--compare-exact and --baseline-rbf need --data")
    if cache is None:
        if not args.data:
            raise ValueError("model file has no posterior cache; pass --data")
        xs, z = _read_training(args.data)
        cache = build_cache(params, LearningProblem(xs, z, grid))
    mean, cov = posterior_predict(cache, xs_test)
    var = np.clip(np.diag(cov), 0.0, None) if xs_test.size else np.zeros(0)
    out = _outdir(args.out)
    io.write_columns(os.path.join(out, "predictions.csv"), ("x", "mean", "var"),
                     [xs_test, mean, var])
    panels = [("learned", mean, var)]
    reference = None
    summary = {"t": int(xs_test.size)}
    if needs_data:
        xs, z = _read_training(args.data)
        data = SyntheticData(xs, z, None, args.a, args.noise_std)
        if args.compare_exact:
            mu_true, cov_true = exact_posterior(data, xs_test)
            var_true = np.clip(np.diag(cov_true), 0.0, None)
            io.write_columns(os.path.join(out, "exact_posterior.csv"), ("x", "mean", "var"),
                             [xs_test, mu_true, var_true])
            summary["rel_error"] = mean_relative_error(mean, mu_true)
            reference = (mu_true, var_true)
        if args.baseline_rbf:
            kernel, noise = fit_rbf(xs, z)
            mu_rbf, cov_rbf = rbf_posterior(xs, z, xs_test, kernel, noise)
            var_rbf = np.clip(np.diag(cov_rbf), 0.0, None)
            io.write_columns(os.path.join(out, "rbf_posterior.csv"), ("x", "mean", "var"),
                             [xs_test, mu_rbf, var_rbf])
            panels.append(("RBF baseline", mu_rbf, var_rbf))
            summary["rbf"] = {"lengthscale": kernel.lengthscale, "variance": kernel.variance,
                              "noise_variance": noise}
            if args.compare_exact:
                summary["rel_error_rbf"] = mean_relative_error(mu_rbf, mu_true)
        if reference is not None:
            panels.insert(0, ("true posterior", *reference))
    io.write_json(os.path.join(out, "summary.json"), summary)
    if not args.no_plots and xs_test.size:
        xtr = ztr = None
        if needs_data:
            xtr, ztr = xs, z
        plotting.posterior_figure(os.path.join(out, "posterior.png"), xs_test, panels,
                                  xtr, ztr, reference)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "approximate": cmd_approximate,
    "ablate": cmd_ablate,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "learn": cmd_learn,
    "predict": cmd_predict,
}


def main(argv=None):
    args, subparser = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", AliasingViolation)
            return COMMANDS[args.command](args)
    except InputFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RNFFError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AliasingViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
