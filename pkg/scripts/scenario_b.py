"""Train on the training part, score the labelled test sessions."""

from _common import load, parser, save

from mousedyn.evaluation import scenario_b, train_user_models
import pandas as pd


def main():
    p = parser(__doc__)
    p.add_argument("--kmax", type=int, default=20)
    args = p.parse_args()
    _, _, train_df, test_df = load(args)
    models = train_user_models(train_df, seed=args.seed, num_trees=args.trees, n_jobs=args.jobs)

    action = scenario_b(train_df, test_df, "action", models=models)
    save(args.out, "b_action.csv", action.table.to_frame())
    rows = []
    for k in range(1, args.kmax + 1):
        r = scenario_b(train_df, test_df, f"set:{k}", models=models).report
        rows.append((k, r.auc, r.eer))
    save(args.out, "b_sets.csv", pd.DataFrame(rows, columns=["k", "auc", "eer"]))
    sess = scenario_b(train_df, test_df, "session", models=models)
    save(args.out, "b_session.json", sess.report.as_dict())
    save(args.out, "b_session_roc.csv", pd.DataFrame(sess.roc.rows(), columns=["threshold", "fpr", "fnr"]))
    print(f"action mean AUC {action.table.mean.auc:.4f}; session AUC {sess.report.auc:.4f} over {len(sess.session_scores)} sessions")


if __name__ == "__main__":
    main()
