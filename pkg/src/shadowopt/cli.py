"""Command line front end.

    shadow-opt run --preset <name> --config <file> [--h <v>] [--k <n>] ...
    shadow-opt sweep --config <file> [--h-grid <list>] [--target <preset>]

Exit codes: 0 on success, 2 on configuration errors, 1 on numeric
failures. Every config-file key is also a flag; flags override the
file.
"""

import argparse
import sys

from .errors import ConfigError, ShadowOptError
from .harness import PRESETS, build_config, parse_config_file, run_h_sweep, run_preset


def _add_common_flags(parser):
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--h", help="step size")
    parser.add_argument("--k", help="iteration count")
    parser.add_argument("--alpha", help="heavy-ball viscosity")
    parser.add_argument("--lambda-reg", dest="lambda_reg", help="ERM regularizer")
    parser.add_argument("--seed", help="random seed")
    parser.add_argument("--initial-point", dest="initial_point", help="comma list or 'random'")
    parser.add_argument("--dataset-path", dest="dataset_path", help="CSV dataset path")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument("--h-grid", dest="h_grid", help="comma list of steps for sweeps")
    parser.add_argument("--naive-start", dest="naive_start", help="true/false")
    parser.add_argument("--shadow-horizon", dest="shadow_horizon", help="design horizon")
    parser.add_argument("--algorithm", help="gd or hb (ERM preset)")
    parser.add_argument("--n-samples", dest="n_samples", help="synthetic dataset size")
    parser.add_argument("--n-features", dest="n_features", help="synthetic feature count")
    parser.add_argument("--init-scale", dest="init_scale", help="random-init scale")
    parser.add_argument("--no-plot", action="store_true", help="skip figure rendering")


_OVERRIDE_KEYS = (
    "h",
    "k",
    "alpha",
    "lambda_reg",
    "seed",
    "initial_point",
    "dataset_path",
    "output_dir",
    "h_grid",
    "naive_start",
    "shadow_horizon",
    "algorithm",
    "n_samples",
    "n_features",
    "init_scale",
    "sweep_target",
)


def _collect_overrides(args):
    overrides = {}
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "no_plot", False):
        overrides["plot"] = "false"
    return overrides


def _build(args, preset=None):
    file_values = parse_config_file(args.config) if args.config else {}
    return build_config(preset=preset, file_values=file_values, overrides=_collect_overrides(args))


def main(argv=None):
    parser = argparse.ArgumentParser(prog="shadow-opt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run one experiment preset")
    run_parser.add_argument("--preset", choices=PRESETS, help="experiment preset")
    _add_common_flags(run_parser)

    sweep_parser = sub.add_parser("sweep", help="run a step-size sweep")
    sweep_parser.add_argument("--target", dest="sweep_target", help="preset swept over h")
    _add_common_flags(sweep_parser)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _build(args, preset=args.preset)
            report = run_preset(config)
            if config.preset == "h_sweep":
                print(f"sweep slope {report.slope:.4f}; outputs in {config.output_dir}")
            else:
                print(
                    f"{config.preset}: max deviation {report.max_deviation:.6g} "
                    f"(radius bound {report.eps_bound:.6g}); outputs in {config.output_dir}"
                )
        else:
            config = _build(args, preset="h_sweep")
            sweep = run_h_sweep(config)
            print(f"sweep slope {sweep.slope:.4f}; outputs in {config.output_dir}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ShadowOptError, FloatingPointError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
