"""Command-line pipeline: fit a field to a cloud, extract and score meshes,
dump persistence diagrams, and run the connectivity-theorem checks.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

import argparse
import os
import sys

from .cloud import normalize
from .connectivity import check_theorem2, check_theorem3
from .fileio import (
    RunConfig,
    export_diagram,
    load_checkpoint,
    load_config,
    load_obj,
    load_ply_ascii,
    load_xyz,
    render_config,
    save_checkpoint,
    save_history,
    save_obj,
    save_report,
    to_train_config,
)
from .filtration import eval_grid, persistence0
from .meshing import marching_cubes, mesh_components, sample_surface
from .metrics import MetricsReport, significant_feature_loss
from .training import train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _load_cloud(path):
    if str(path).endswith(".ply"):
        return load_ply_ascii(path)
    return load_xyz(path)


def _cmd_reconstruct(args):
    config = load_config(args.config) if args.config else RunConfig()
    config.input = str(args.input)
    config.out = str(args.out)
    train_config = to_train_config(config)
    raw = _load_cloud(args.input)
    os.makedirs(args.out, exist_ok=True)
    cloud = normalize(raw)
    model, history = train(cloud, train_config)
    save_checkpoint(model, os.path.join(args.out, "model.ckpt"))
    save_history(history, os.path.join(args.out, "history.csv"))
    with open(os.path.join(args.out, "config.cfg"), "w") as fh:
        fh.write(render_config(config))
    final = history.total[-1] if len(history) else float("nan")
    print(
        f"reconstructed {raw.shape[0]} points in {train_config.iterations} "
        f"iterations; final loss {final:.6g}; outputs in {args.out}"
    )
    return 0


def _cmd_mesh(args):
    model = load_checkpoint(args.model)
    mesh = marching_cubes(model, resolution=args.resolution, iso=args.iso)
    save_obj(mesh, args.out)
    print(
        f"wrote {len(mesh.vertices)} vertices / {len(mesh.triangles)} "
        f"triangles to {args.out}"
    )
    return 0


def _cmd_eval(args):
    mesh = load_obj(args.mesh)
    count, _sizes = mesh_components(mesh)
    pred = sample_surface(mesh, args.samples, seed=args.seed)
    gt = _load_cloud(args.gt)
    sfl = None
    if args.model is not None:
        sfl = significant_feature_loss(load_checkpoint(args.model))
    report = MetricsReport.from_point_sets(
        pred, gt, significant_feature_loss=sfl, component_count=count
    )
    save_report(report, args.report)
    print(
        f"chamfer {report.cd_two_sided:.6g}, hausdorff "
        f"{report.hd_two_sided:.6g}, {count} component(s); report at "
        f"{args.report}"
    )
    return 0


def _cmd_diagram(args):
    model = load_checkpoint(args.model)
    evaluation = eval_grid(model, resolution=args.resolution)
    diagram = persistence0(evaluation.grid, "absolute")
    export_diagram(diagram, args.out)
    print(f"wrote {len(diagram.pairs)} pairs to {args.out}")
    return 0


def _cmd_verify(args):
    if args.theorem == 2:
        n = check_theorem2(args.m, args.k, trials=args.trials, seed=args.seed)
        print(f"{n} counterexamples over {args.trials} trials")
    else:
        if args.eps is None:
            raise ValueError("--eps is required for --theorem 3")
        report = check_theorem3(
            args.m, args.k, args.eps, trials=args.trials, seed=args.seed,
            eps_relative=args.eps_relative,
        )
        print(
            f"verified {report.verified} / undecided {report.undecided} / "
            f"violated {report.violations} over {report.trials} trials"
        )
    return 0


def _build_parser():
    parser = _Parser(prog="toposdf", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("reconstruct", help="fit a field to a point cloud")
    p.add_argument("--input", required=True, help="cloud (.xyz or ascii .ply)")
    p.add_argument("--config", default=None, help="key = value settings file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(cmd=_cmd_reconstruct)

    p = sub.add_parser("mesh", help="extract a level-set mesh from a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--iso", type=float, default=0.0)
    p.add_argument("--out", required=True, help="OBJ path")
    p.set_defaults(cmd=_cmd_mesh)

    p = sub.add_parser("eval", help="score a mesh against a ground-truth cloud")
    p.add_argument("--mesh", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--model", default=None, help="checkpoint for the feature loss")
    p.add_argument("--report", required=True, help="JSON output path")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(cmd=_cmd_eval)

    p = sub.add_parser("diagram", help="persistence diagram of a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--resolution", type=int, default=16)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(cmd=_cmd_diagram)

    p = sub.add_parser("verify", help="randomized connectivity-theorem checks")
    p.add_argument("--theorem", type=int, choices=(2, 3), required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--eps-relative", action="store_true")
    p.set_defaults(cmd=_cmd_verify)

    return parser


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "cmd", None) is None:
            raise _UsageError(parser.format_usage())
        return args.cmd(args)
    except _UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main(sys.argv[1:]))
