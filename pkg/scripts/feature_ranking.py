"""Gain-ratio ranking of the 39 action features against the user label."""

import pandas as pd

from _common import load, parser, save

from mousedyn.pipeline import rank_features


def main():
    args = parser(__doc__).parse_args()
    _, _, train_df, _ = load(args)
    df = pd.DataFrame(rank_features(train_df), columns=["feature", "gain_ratio"])
    df.insert(0, "rank", range(1, len(df) + 1))
    save(args.out, "gain_ratio.csv", df)
    print(df.head(10).to_string(index=False))


if __name__ == "__main__":
    main()
