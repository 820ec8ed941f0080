"""Session-level AUC with no resampling, linear and spline resampling."""

from _common import load, parser, save

from mousedyn.evaluation import smoothing_experiment
from mousedyn.resampling import ResampleConfig, ResampleMethod


def main():
    p = parser(__doc__)
    p.add_argument("--hz", type=float, default=20.0)
    args = p.parse_args()
    _, seg, _, _ = load(args)
    cfgs = [ResampleConfig(args.hz, m) for m in ResampleMethod]
    res = smoothing_experiment(None, cfgs, segmented=seg, seed=args.seed, num_trees=args.trees, n_jobs=args.jobs)
    summary = {key: r.report.as_dict() for key, r in res.items()}
    save(args.out, "smoothing.json", summary)
    for key, r in res.items():
        print(f"{key:>14}: AUC {r.report.auc:.4f}  EER {r.report.eer:.4f}")


if __name__ == "__main__":
    main()
