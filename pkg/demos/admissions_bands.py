"""Reliance bands for the simulated admissions survey.

Run with ``python3 demos/admissions_bands.py [n] [seed]``. Prints the
sample summary, the conservative band per covariate next to the exact
value obtained by enumeration, and whether the truth is inside its band.
"""

import sys

from blackbox_reliance import admissions


def main(n=admissions.DEFAULT_N, seed=admissions.DEFAULT_SEED):
    data = admissions.simulate(n, seed)
    summary = admissions.summarize(data)
    print(f"n={summary['n']} respondents={summary['respondents']} "
          f"(exact rate {admissions.exact_response_rate():.4f})")
    result = admissions.run_band_analysis(n, seed)
    print(f"logistic accuracy on respondents: {result.accuracy:.4f}, P(Z=1) used: {result.p_z1:.4f}")
    inside = result.truth_inside()
    for row in result.rows():
        c = row["covariate"]
        print(f"{c:>6}: [{row['r_min']:.4f}, {row['r_max']:.4f}]  true {row['true_value']:.4f}  "
              f"{'inside' if inside[c] else 'OUTSIDE'}")
    for claim, holds in result.ordering_claims().items():
        print(f"{claim}: {holds}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
