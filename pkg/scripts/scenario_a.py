"""Cross-validated verification on the training part.

Writes the per-user action table, the per-type tables and the AUC/EER curve
over set sizes 1..20.
"""

from _common import load, parser, save

from mousedyn.evaluation import cross_validated_scores, scenario_a_action, scenario_a_action_set, scenario_a_by_type
import pandas as pd


def main():
    p = parser(__doc__)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--kmax", type=int, default=20)
    args = p.parse_args()
    _, _, train_df, _ = load(args)
    kw = dict(folds=args.folds, seed=args.seed, num_trees=args.trees, n_jobs=args.jobs)

    cv = cross_validated_scores(train_df, **kw)
    table = scenario_a_action(train_df, cv=cv)
    save(args.out, "a_action.csv", table.to_frame())
    print(f"action: mean ACC {table.mean.acc:.2f}  AUC {table.mean.auc:.4f}  EER {table.mean.eer:.4f}")

    for kind in ("MM", "PC", "DD"):
        t = scenario_a_by_type(train_df, kind, **kw)
        save(args.out, f"a_type_{kind}.csv", t.to_frame())
        print(f"{kind}: mean AUC {t.mean.auc:.4f}")

    curve = scenario_a_action_set(cv=cv, k_range=range(1, args.kmax + 1))
    save(args.out, "a_sets.csv", pd.DataFrame(curve, columns=["k", "auc", "eer"]))


if __name__ == "__main__":
    main()
